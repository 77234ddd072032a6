#include "sas/nn/archive.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>

#include "sas/errors.hpp"

namespace sas::nn {

namespace {

constexpr char kMagic[8] = {'S', 'A', 'S', 'A', 'R', 'C', 'H', '1'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

std::size_t width(DType d) { return d == DType::kFloat32 ? 4 : 8; }
const char* dtype_name(DType d) { return d == DType::kFloat32 ? "f32" : "f64"; }

DType parse_dtype(const std::string& s) {
  if (s == "f32") return DType::kFloat32;
  if (s == "f64") return DType::kFloat64;
  throw FormatError("unknown dtype '" + s + "'");
}

void put_value(std::string& out, double x, DType d) {
  if (d == DType::kFloat32) {
    const float f = static_cast<float>(x);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  } else {
    std::uint64_t bits;
    std::memcpy(&bits, &x, 8);
    put_u64(out, bits);
  }
}

double get_value(const unsigned char* p, DType d) {
  if (d == DType::kFloat32) {
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
  }
  const std::uint64_t bits = get_u64(p);
  double x;
  std::memcpy(&x, &bits, 8);
  return x;
}

std::string shape_str(const std::vector<Index>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

}  // namespace

std::vector<ArchiveEntry> snapshot(const ParameterSet& params, DType dtype) {
  std::vector<ArchiveEntry> out;
  params.for_each([&](const Parameter& p) {
    out.push_back({p.name, {p.value.rows(), p.value.cols()}, dtype, p.value});
  });
  return out;
}

void save_archive(const std::filesystem::path& path, const std::vector<ArchiveEntry>& entries) {
  nlohmann::json manifest = nlohmann::json::array();
  std::string payload;
  for (const auto& e : entries) {
    manifest.push_back({{"name", e.name},
                        {"shape", e.shape},
                        {"dtype", dtype_name(e.dtype)},
                        {"byte_offset", payload.size()}});
    for (Index i = 0; i < e.value.size(); ++i) put_value(payload, e.value.data()[i], e.dtype);
  }
  const std::string header = manifest.dump();
  std::string bytes(kMagic, sizeof kMagic);
  put_u64(bytes, header.size());
  bytes += header;
  bytes += payload;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

void save_archive(const std::filesystem::path& path, const ParameterSet& params, DType dtype) {
  save_archive(path, snapshot(params, dtype));
}

std::vector<ArchiveEntry> load_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError(path.string() + ": not a parameter archive");
  }
  const std::uint64_t header_len = get_u64(data + 8);
  if (16 + header_len > bytes.size()) throw FormatError(path.string() + ": truncated manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(16, header_len));
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(path.string() + ": bad manifest: " + ex.what());
  }
  const std::size_t payload_start = 16 + header_len;
  std::vector<ArchiveEntry> out;
  for (const auto& m : manifest) {
    ArchiveEntry e;
    e.name = m.at("name");
    e.shape = m.at("shape").get<std::vector<Index>>();
    e.dtype = parse_dtype(m.at("dtype"));
    if (e.shape.size() != 2) throw FormatError("archive entry '" + e.name + "' is not 2-D");
    const std::size_t offset = m.at("byte_offset");
    const std::size_t count = static_cast<std::size_t>(e.shape[0] * e.shape[1]);
    if (payload_start + offset + count * width(e.dtype) > bytes.size()) {
      throw FormatError("archive entry '" + e.name + "' runs past end of file");
    }
    e.value.resize(e.shape[0], e.shape[1]);
    const unsigned char* p = data + payload_start + offset;
    for (std::size_t i = 0; i < count; ++i) e.value.data()[i] = get_value(p + i * width(e.dtype), e.dtype);
    out.push_back(std::move(e));
  }
  return out;
}

void restore(ParameterSet& params, const std::vector<ArchiveEntry>& entries) {
  std::map<std::string, const ArchiveEntry*> by_name;
  for (const auto& e : entries) by_name[e.name] = &e;
  std::string diff;
  params.for_each([&](Parameter& p) {
    auto it = by_name.find(p.name);
    const std::vector<Index> want{p.value.rows(), p.value.cols()};
    if (it == by_name.end()) {
      diff += "\n  missing " + p.name + " " + shape_str(want);
    } else if (it->second->shape != want) {
      diff += "\n  " + p.name + ": archive " + shape_str(it->second->shape) + " vs model " +
              shape_str(want);
    }
  });
  for (const auto& [name, e] : by_name) {
    if (!params.find(name)) diff += "\n  unexpected " + name + " " + shape_str(e->shape);
  }
  if (!diff.empty()) throw ShapeError("checkpoint does not match model:" + diff);
  params.for_each([&](Parameter& p) { p.value = by_name.at(p.name)->value; });
}

}  // namespace sas::nn
