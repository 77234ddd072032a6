#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "sas/errors.hpp"
#include "sas/nn/archive.hpp"
#include "sas/nn/gradcheck.hpp"
#include "sas/nn/layers.hpp"
#include "sas/nn/optim.hpp"

using namespace sas;
using namespace sas::nn;

namespace {

Matrix mat(Index r, Index c, std::initializer_list<double> xs) {
  Matrix m(r, c);
  auto it = xs.begin();
  for (Index i = 0; i < r; ++i) {
    for (Index j = 0; j < c; ++j) m(i, j) = *it++;
  }
  return m;
}

double sigmoid_d(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("linear layer shapes and values") {
  Tape t;
  Var x = t.constant(mat(1, 2, {1, 2}));
  Var w = t.constant(mat(3, 2, {1, 0, 0, 1, 1, 1}));
  Var b = t.constant(mat(1, 3, {0.5, 0, -1}));
  const Matrix y = linear(x, w, b).value();
  REQUIRE(y.rows() == 1);
  REQUIRE(y.cols() == 3);
  CHECK(y(0, 0) == doctest::Approx(1.5));
  CHECK(y(0, 1) == doctest::Approx(2.0));
  CHECK(y(0, 2) == doctest::Approx(2.0));

  Rng rng(1);
  ParameterSet ps;
  Linear lin(ps, "l", 3, 3, rng);
  Tape t2;
  CHECK(lin(t2, t2.constant(Matrix::Ones(5, 3))).value().rows() == 5);
  CHECK((lin.weight->value.array().abs() <= 1.0 / std::sqrt(3.0)).all());
}

TEST_CASE("lstm from zero state with zero weights") {
  Rng rng(2);
  ParameterSet ps;
  LstmCell cell(ps, "lstm", 3, 4, rng);
  CHECK(cell.bias->value.middleCols(4, 4).isConstant(1.0));
  CHECK(cell.bias->value.leftCols(4).isZero());
  cell.weight->value.setZero();
  cell.bias->value.setZero();
  Tape t;
  auto s = cell(t, t.constant(Matrix::Ones(1, 3)), cell.zero_state(t));
  // i = f = o = 1/2, g = 0: both states stay zero.
  CHECK(s.h.value().isZero());
  CHECK(s.c.value().isZero());

  cell.bias->value.middleCols(8, 4).setConstant(1.0);  // candidate
  Tape t2;
  auto s2 = cell(t2, t2.constant(Matrix::Ones(1, 3)), cell.zero_state(t2));
  const double c = 0.5 * std::tanh(1.0);
  CHECK(s2.c.value()(0, 0) == doctest::Approx(c));
  CHECK(s2.h.value()(0, 3) == doctest::Approx(0.5 * std::tanh(c)));
}

TEST_CASE("single-step bilstm halves agree with the cells") {
  Rng rng(3);
  ParameterSet ps;
  BiLstm bi(ps, "bi", 2, 3, 1, rng);
  Tape t;
  Var x = t.constant(mat(1, 2, {0.3, -0.7}));
  const Matrix out = bi(t, x).value();
  REQUIRE(out.rows() == 1);
  REQUIRE(out.cols() == 6);
  const auto fwd = bi.layers[0].first(t, x, bi.layers[0].first.zero_state(t));
  const auto bwd = bi.layers[0].second(t, x, bi.layers[0].second.zero_state(t));
  CHECK((out.leftCols(3) - fwd.h.value()).norm() < 1e-14);
  CHECK((out.rightCols(3) - bwd.h.value()).norm() < 1e-14);
}

TEST_CASE("gru keeps the state when the update gate is closed") {
  Rng rng(4);
  ParameterSet ps;
  GruCell g(ps, "gru", 2, 2, rng);
  g.weight_gates->value.setZero();
  g.bias_gates->value.setConstant(-60.0);
  Tape t;
  Var h = t.constant(mat(1, 2, {0.25, -0.5}));
  CHECK((g(t, t.constant(Matrix::Ones(1, 2)), h).value() - h.value()).norm() < 1e-12);
}

TEST_CASE("attention weights follow the logits") {
  Tape t;
  Var q = t.constant(mat(1, 1, {1.0}));
  Var k = t.constant(mat(2, 1, {std::log(2.0), 0.0}));
  Var v = t.constant(mat(2, 2, {3, 0, 0, 3}));
  const auto a = scaled_dot_attention(q, k, v);
  CHECK(a.weights.value()(0, 0) == doctest::Approx(2.0 / 3.0));
  CHECK(a.weights.value()(0, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(a.context.value()(0, 0) == doctest::Approx(2.0));
  CHECK(a.context.value()(0, 1) == doctest::Approx(1.0));

  // An additive bias of -ln 2 on the first key evens the weights out.
  Var bias = t.constant(mat(1, 2, {-std::log(2.0), 0.0}));
  const auto even = scaled_dot_attention(q, k, v, bias);
  CHECK(even.weights.value()(0, 0) == doctest::Approx(0.5));

  CHECK_THROWS_AS(scaled_dot_attention(t.constant(Matrix::Ones(1, 2)), k, v), ShapeError);
  CHECK_THROWS_AS(scaled_dot_attention(q, k, t.constant(Matrix::Ones(3, 2))), ShapeError);
}

TEST_CASE("convolution matches a direct loop") {
  Rng rng(5);
  ParameterSet ps;
  Conv1dSeq conv(ps, "cnn", 3, 2, {1, 2}, rng);
  Matrix xs(4, 3);
  for (Index i = 0; i < xs.size(); ++i) xs.data()[i] = std::sin(0.7 * static_cast<double>(i));
  Tape t;
  const Matrix out = conv(t, t.constant(xs)).value();
  REQUIRE(out.cols() == conv.out_dim());
  REQUIRE(out.cols() == 4);

  Index col = 0;
  for (const auto& [width, proj] : conv.filters) {
    const Matrix& w = proj.weight->value;
    const Matrix& b = proj.bias->value;
    for (Index f = 0; f < w.rows(); ++f, ++col) {
      double pooled = 0.0;
      const Index windows = xs.rows() - width + 1;
      for (Index s = 0; s < windows; ++s) {
        double z = b(0, f);
        for (Index k = 0; k < width; ++k) {
          for (Index d = 0; d < xs.cols(); ++d) z += w(f, k * xs.cols() + d) * xs(s + k, d);
        }
        pooled += std::max(z, 0.0);
      }
      CHECK(out(0, col) == doctest::Approx(pooled / static_cast<double>(windows)));
    }
  }
  CHECK_THROWS_AS(conv(t, t.constant(Matrix::Ones(1, 3))), SequenceTooShort);
}

TEST_CASE("backward of half the squared norm returns the input") {
  Tape t;
  Var p = t.leaf(mat(1, 3, {1, -2, 3}));
  Var loss = scale(sum(mul(p, p)), 0.5);
  t.backward(loss);
  CHECK((t.grad(p) - p.value()).norm() < 1e-15);
  CHECK_THROWS_AS(t.backward(p), NonScalarLoss);
}

TEST_CASE("softmax, log-softmax and sigmoid values") {
  Tape t;
  Var x = t.constant(mat(1, 3, {0, std::log(2.0), std::log(5.0)}));
  const Matrix s = softmax_rows(x).value();
  CHECK(s(0, 2) == doctest::Approx(5.0 / 8.0));
  CHECK(log_softmax_rows(x).value()(0, 0) == doctest::Approx(-std::log(8.0)));
  CHECK(sigmoid(x).value()(0, 1) == doctest::Approx(sigmoid_d(std::log(2.0))));
  const Matrix big = softmax_rows(t.constant(mat(1, 2, {1000, 0}))).value();
  CHECK(big(0, 0) == doctest::Approx(1.0));
  CHECK(std::isfinite(log_softmax_rows(t.constant(mat(1, 2, {1000, 0}))).value()(0, 1)));
}

TEST_CASE("ops agree with finite differences") {
  Rng rng(6);
  ParameterSet ps;
  ps.add("a", uniform_init(3, 4, 4, rng));
  ps.add("b", uniform_init(4, 2, 4, rng));
  ps.add("row", uniform_init(1, 2, 2, rng));
  auto fn = [&](Tape& t) {
    Var a = t.param(ps.get("a"));
    Var b = t.param(ps.get("b"));
    Var h = tanh(add(matmul(a, b), t.param(ps.get("row"))));
    Var u = concat_cols({sigmoid(h), exp(slice_cols(h, 0, 1)) * slice_cols(h, 1, 1) * t.constant(Matrix::Ones(3, 1))});
    Var g = gather_rows(unfold(a, 2), {1, 0, 1});
    Var p = pick(log_softmax_rows(g), {0, 3, 7});
    return add(add(mean(u), sum(p)), sum(mean_rows(transpose(matmul_t(a, a)))));
  };
  const auto r = check_gradients(ps, fn, 20, 9);
  CHECK(r.checked > 0);
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("adamw applies decoupled decay before the moment update") {
  ParameterSet ps;
  ps.add("p", mat(1, 2, {1.0, -2.0}));
  GradMap g{{"p", Matrix::Zero(1, 2)}};
  OptimizerState st;
  st.config.learning_rate = 0.5;
  st.config.weight_decay = 0.1;
  adamw_step(ps, g, st);
  // Zero gradient: only the decay term moves the weights.
  CHECK(ps.get("p").value(0, 0) == doctest::Approx(0.95));
  CHECK(ps.get("p").value(0, 1) == doctest::Approx(-1.9));
  CHECK(st.step == 1);

  // The first bias-corrected step has magnitude lr regardless of scale.
  ParameterSet q;
  q.add("p", mat(1, 1, {0.0}));
  OptimizerState s2;
  s2.config.learning_rate = 0.01;
  s2.config.weight_decay = 0.0;
  adamw_step(q, {{"p", mat(1, 1, {123.0})}}, s2);
  CHECK(q.get("p").value(0, 0) == doctest::Approx(-0.01).epsilon(1e-6));
}

TEST_CASE("global norm clipping") {
  GradMap g{{"a", mat(1, 2, {3, 0})}, {"b", mat(1, 1, {4})}};
  CHECK(clip_global_norm(g, 1.0) == doctest::Approx(5.0));
  CHECK(g["a"](0, 0) == doctest::Approx(0.6));
  CHECK(g["b"](0, 0) == doctest::Approx(0.8));
  CHECK(clip_global_norm(g, 10.0) == doctest::Approx(1.0));
  CHECK(g["b"](0, 0) == doctest::Approx(0.8));
}

TEST_CASE("archive round trip and shape mismatch") {
  Rng rng(7);
  ParameterSet ps;
  ps.add("w", uniform_init(3, 2, 2, rng));
  ps.add("b", uniform_init(1, 3, 2, rng));
  const auto path = std::filesystem::temp_directory_path() / "sas_unit_nn.bin";
  save_archive(path, ps);
  const auto entries = load_archive(path);
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].name == "w");
  CHECK(entries[0].shape == std::vector<Index>{3, 2});

  ParameterSet same;
  same.add("w", Matrix::Zero(3, 2));
  same.add("b", Matrix::Zero(1, 3));
  restore(same, entries);
  CHECK(same.get("w").value == ps.get("w").value);
  CHECK(same.get("b").value == ps.get("b").value);

  ParameterSet other;
  other.add("w", Matrix::Zero(2, 3));
  other.add("extra", Matrix::Zero(1, 1));
  try {
    restore(other, entries);
    FAIL("restore accepted a mismatched archive");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("w") != std::string::npos);
    CHECK(msg.find("extra") != std::string::npos);
    CHECK(msg.find("b") != std::string::npos);
  }

  save_archive(path, ps, DType::kFloat32);
  const auto f32 = load_archive(path);
  CHECK(f32[0].dtype == DType::kFloat32);
  CHECK((f32[0].value - ps.get("w").value).cwiseAbs().maxCoeff() < 1e-6);

  std::ofstream(path, std::ios::binary) << "garbage";
  CHECK_THROWS_AS(load_archive(path), FormatError);
}

TEST_CASE("parameter registry") {
  ParameterSet ps;
  ps.add("a", Matrix::Zero(1, 1));
  ps.add("frozen", Matrix::Zero(1, 1), false);
  CHECK(ps.size() == 2);
  CHECK(ps.trainable_count() == 1);
  CHECK(ps.find("nope") == nullptr);
  Tape t;
  Var a1 = t.param(ps.get("a"));
  Var a2 = t.param(ps.get("a"));
  CHECK(a1.id() == a2.id());
}

}  // TEST_SUITE
