#include "cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>

#include "sas/errors.hpp"
#include "sas/metrics.hpp"
#include "sas/nn/archive.hpp"

namespace sas::cli {

namespace fs = std::filesystem;
using nlohmann::json;

json default_config_json() { return to_json(RunConfig{}); }

json to_json(const RunConfig& c) {
  return {
      {"seed", c.seed},
      {"output_dir", c.output_dir.string()},
      {"gen",
       {{"houses", c.gen.houses},
        {"samples_per_house", c.gen.samples_per_house},
        {"rooms", c.gen.spec.rooms},
        {"nodes_per_room", c.gen.spec.nodes_per_room},
        {"objects_per_room", c.gen.spec.objects_per_room},
        {"min_path_m", c.gen.min_path_m},
        {"max_path_m", c.gen.max_path_m}}},
      {"view",
       {{"visual_dim", c.features.view.visual_dim},
        {"max_range", c.features.view.max_range},
        {"confidence_noise", c.features.view.confidence_noise},
        {"noise_seed", c.features.view.noise_seed},
        {"feature_seed", c.features.view.feature_seed}}},
      {"features",
       {{"embed_dim", c.features.embed_dim},
        {"top_k", c.features.top_k},
        {"embed_seed", c.features.embed_seed},
        {"embeddings_file", c.embeddings_file}}},
      {"mix",
       {{"max_node_gap_m", c.mix.max_node_gap_m},
        {"min_node_gap_m", c.mix.min_node_gap_m},
        {"min_loop_angle_deg", c.mix.min_loop_angle_deg},
        {"min_len_m", c.mix.min_len_m},
        {"max_len_m", c.mix.max_len_m},
        {"max_pairs", c.mix.max_pairs},
        {"max_expansions", c.mix.max_expansions}}},
      {"model",
       {{"attn_dim", c.model.attn_dim},
        {"hidden_dim", c.model.hidden_dim},
        {"layers", c.model.layers},
        {"max_decode_len", c.model.max_decode_len}}},
      {"train",
       {{"batch_size", c.train.batch_size},
        {"learning_rate", c.train.learning_rate},
        {"weight_decay", c.train.weight_decay},
        {"clip_norm", c.train.clip_norm},
        {"iterations", c.train.iterations},
        {"lambda_lm", c.train.weights.lm},
        {"lambda_uls", c.train.weights.uls},
        {"lambda_tal", c.train.weights.tal},
        {"forcing", train::to_string(c.train.forcing)},
        {"eval_interval", c.train.eval_interval},
        {"checkpoint_interval", c.train.checkpoint_interval},
        {"uls_window", c.train.uls_window},
        {"eval_fraction", c.eval_fraction},
        {"ablation", c.ablation}}},
      {"arl",
       {{"iterations", c.arl.iterations},
        {"period", c.arl.period},
        {"pg_weight", c.arl.pg_weight},
        {"baseline_decay", c.arl.baseline_decay},
        {"batch_size", c.arl.batch_size},
        {"max_sample_len", c.arl.max_sample_len},
        {"learning_rate", c.arl.learning_rate},
        {"reward_learning_rate", c.arl.reward_learning_rate},
        {"reward", arl::to_string(c.reward.kind)},
        {"filters", c.reward.filters},
        {"reward_hidden_dim", c.reward.hidden_dim}}},
  };
}

namespace {

void merge_checked(json& base, const json& user, const std::string& prefix) {
  if (!user.is_object()) throw ConfigError("config section '" + prefix + "' must be an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_checked(slot, it.value(), key);
    } else if (slot.is_number() && !it.value().is_number()) {
      throw ConfigError("config key '" + key + "' must be a number");
    } else if (slot.is_string() && !it.value().is_string()) {
      throw ConfigError("config key '" + key + "' must be a string");
    } else {
      slot = it.value();
    }
  }
}

template <typename T>
T get(const json& j, const char* section, const char* key) {
  try {
    return j.at(section).at(key).get<T>();
  } catch (const json::exception& ex) {
    throw ConfigError(std::string(section) + "." + key + ": " + ex.what());
  }
}

}  // namespace

RunConfig parse_config(const json& user) {
  json doc = default_config_json();
  merge_checked(doc, user, "");
  RunConfig c;
  try {
    c.seed = doc.at("seed").get<std::uint64_t>();
    c.output_dir = doc.at("output_dir").get<std::string>();
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("seed/output_dir: ") + ex.what());
  }
  c.gen.seed = c.seed;
  c.gen.houses = get<int>(doc, "gen", "houses");
  c.gen.samples_per_house = get<int>(doc, "gen", "samples_per_house");
  c.gen.spec.rooms = get<int>(doc, "gen", "rooms");
  c.gen.spec.nodes_per_room = get<int>(doc, "gen", "nodes_per_room");
  c.gen.spec.objects_per_room = get<int>(doc, "gen", "objects_per_room");
  c.gen.min_path_m = get<double>(doc, "gen", "min_path_m");
  c.gen.max_path_m = get<double>(doc, "gen", "max_path_m");

  auto& view = c.features.view;
  view.visual_dim = get<int>(doc, "view", "visual_dim");
  view.max_range = get<double>(doc, "view", "max_range");
  view.confidence_noise = get<double>(doc, "view", "confidence_noise");
  view.noise_seed = get<std::uint64_t>(doc, "view", "noise_seed");
  view.feature_seed = get<std::uint64_t>(doc, "view", "feature_seed");
  c.gen.view = view;
  c.features.embed_dim = get<int>(doc, "features", "embed_dim");
  c.features.top_k = get<std::size_t>(doc, "features", "top_k");
  c.features.embed_seed = get<std::uint64_t>(doc, "features", "embed_seed");
  c.embeddings_file = get<std::string>(doc, "features", "embeddings_file");

  c.mix.max_node_gap_m = get<double>(doc, "mix", "max_node_gap_m");
  c.mix.min_node_gap_m = get<double>(doc, "mix", "min_node_gap_m");
  c.mix.min_loop_angle_deg = get<double>(doc, "mix", "min_loop_angle_deg");
  c.mix.min_len_m = get<double>(doc, "mix", "min_len_m");
  c.mix.max_len_m = get<double>(doc, "mix", "max_len_m");
  c.mix.max_pairs = get<std::size_t>(doc, "mix", "max_pairs");
  c.mix.max_expansions = get<std::size_t>(doc, "mix", "max_expansions");
  c.mix.seed = c.seed;

  c.model.visual_dim = view.visual_dim;
  c.model.embed_dim = c.features.embed_dim;
  c.model.attn_dim = get<nn::Index>(doc, "model", "attn_dim");
  c.model.hidden_dim = get<nn::Index>(doc, "model", "hidden_dim");
  c.model.layers = get<int>(doc, "model", "layers");
  c.model.max_decode_len = get<int>(doc, "model", "max_decode_len");

  c.train.batch_size = get<int>(doc, "train", "batch_size");
  c.train.learning_rate = get<double>(doc, "train", "learning_rate");
  c.train.weight_decay = get<double>(doc, "train", "weight_decay");
  c.train.clip_norm = get<double>(doc, "train", "clip_norm");
  c.train.iterations = get<int>(doc, "train", "iterations");
  c.train.weights.lm = get<double>(doc, "train", "lambda_lm");
  c.train.weights.uls = get<double>(doc, "train", "lambda_uls");
  c.train.weights.tal = get<double>(doc, "train", "lambda_tal");
  c.train.forcing = train::parse_forcing(get<std::string>(doc, "train", "forcing"));
  c.train.eval_interval = get<int>(doc, "train", "eval_interval");
  c.train.checkpoint_interval = get<int>(doc, "train", "checkpoint_interval");
  c.train.uls_window = get<int>(doc, "train", "uls_window");
  c.train.seed = c.seed;
  c.eval_fraction = get<double>(doc, "train", "eval_fraction");
  c.ablation = get<std::string>(doc, "train", "ablation");
  if (!c.ablation.empty()) c.train = train::apply(train::find_ablation(c.ablation), c.train);

  c.arl.iterations = get<int>(doc, "arl", "iterations");
  c.arl.period = get<int>(doc, "arl", "period");
  c.arl.pg_weight = get<double>(doc, "arl", "pg_weight");
  c.arl.baseline_decay = get<double>(doc, "arl", "baseline_decay");
  c.arl.batch_size = get<int>(doc, "arl", "batch_size");
  c.arl.max_sample_len = get<int>(doc, "arl", "max_sample_len");
  c.arl.learning_rate = get<double>(doc, "arl", "learning_rate");
  c.arl.reward_learning_rate = get<double>(doc, "arl", "reward_learning_rate");
  c.arl.seed = c.seed;
  c.reward.kind = arl::parse_reward_kind(get<std::string>(doc, "arl", "reward"));
  c.reward.filters = get<nn::Index>(doc, "arl", "filters");
  c.reward.hidden_dim = get<nn::Index>(doc, "arl", "reward_hidden_dim");
  c.reward.embed_dim = c.features.embed_dim;
  c.reward.visual_dim = c.model.hidden_dim;

  if (c.eval_fraction < 0.0 || c.eval_fraction >= 1.0) throw ConfigError("train.eval_fraction must be in [0, 1)");
  if (c.features.top_k < 1) throw ConfigError("features.top_k must be at least 1");
  c.gen.validate();
  c.mix.validate();
  c.train.validate();
  c.arl.validate();
  c.reward.validate();
  return c;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("bad config path '" + path + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      break;
    }
    if (!node->contains(key)) (*node)[key] = json::object();
    node = &(*node)[key];
    start = dot + 1;
  }
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path);
    doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError(path + ": not valid JSON");
  }
  for (const auto& o : overrides) apply_override(doc, o);
  if (const char* env = std::getenv("SAS_SEED")) {
    try {
      doc["seed"] = std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigError(std::string("SAS_SEED is not an integer: ") + env);
    }
  }
  return parse_config(doc);
}

namespace {

fs::path in_run(const RunConfig& cfg, const fs::path& p, const char* fallback) {
  if (p.empty()) return cfg.output_dir / fallback;
  return p;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

features::EmbeddingTable scene_table(const RunConfig& cfg) {
  if (!cfg.embeddings_file.empty()) return features::EmbeddingTable::load(cfg.embeddings_file, cfg.features.embed_seed);
  return features::EmbeddingTable::seeded(features::scene_tokens(), cfg.features.embed_dim, cfg.features.embed_seed);
}

features::EmbeddingTable word_table(const RunConfig& cfg, const corpus::Vocabulary& vocab) {
  if (!cfg.embeddings_file.empty()) return features::EmbeddingTable::load(cfg.embeddings_file, cfg.features.embed_seed);
  std::vector<std::string> tokens;
  for (int i = corpus::Vocabulary::kReserved; i < vocab.size(); ++i) tokens.push_back(vocab.token(i));
  return features::EmbeddingTable::seeded(tokens, cfg.features.embed_dim, cfg.features.embed_seed);
}

model::SpeakerModel make_model(const RunConfig& cfg, const corpus::Vocabulary& vocab,
                               const features::EmbeddingTable& table) {
  model::ModelConfig mc = cfg.model;
  mc.embed_dim = table.dim();
  mc.vocab_size = vocab.size();
  return model::SpeakerModel(mc, mix_seed(cfg.seed, 3));
}

model::SpeakerModel load_model(const RunConfig& cfg, const corpus::Vocabulary& vocab,
                               const features::EmbeddingTable& table, const fs::path& checkpoint) {
  if (checkpoint.empty()) throw ConfigError("--checkpoint is required");
  auto m = make_model(cfg, vocab, table);
  nn::restore(m.params(), nn::load_archive(checkpoint));
  return m;
}

/// Silver/original records split into train and eval; mixed records only train.
void split(const RunConfig& cfg, const std::vector<corpus::CorpusRecord>& records,
           std::vector<corpus::CorpusRecord>& train_recs, std::vector<corpus::CorpusRecord>& eval_recs) {
  std::vector<std::size_t> base;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].provenance == corpus::Provenance::kMixed) {
      train_recs.push_back(records[i]);
    } else {
      base.push_back(i);
    }
  }
  Rng rng(mix_seed(cfg.seed, 4));
  rng.shuffle(base);
  std::size_t n_eval = static_cast<std::size_t>(cfg.eval_fraction * static_cast<double>(base.size()));
  if (cfg.eval_fraction > 0.0 && n_eval == 0 && base.size() > 1) n_eval = 1;
  for (std::size_t k = 0; k < base.size(); ++k) {
    (k < n_eval ? eval_recs : train_recs).push_back(records[base[k]]);
  }
}

}  // namespace

Workspace load_workspace(const RunConfig& cfg, const fs::path& corpus_file) {
  Workspace w;
  w.houses = corpus::load_houses(cfg.output_dir / "houses.json");
  w.records = corpus::load_corpus(corpus_file);
  w.vocab = corpus::Vocabulary::load(cfg.output_dir / "vocab.txt");
  w.lexicon = corpus::PosLexicon::load(cfg.output_dir / "lexicon.tsv");
  return w;
}

int cmd_gen(const RunConfig& cfg, std::ostream& out) {
  ensure_dir(cfg.output_dir);
  const auto g = pipeline::generate(cfg.gen);
  corpus::save_houses(cfg.output_dir / "houses.json", g.houses);
  corpus::save_corpus(cfg.output_dir / "corpus.jsonl", g.records);
  g.vocab.save(cfg.output_dir / "vocab.txt");
  g.lexicon.save(cfg.output_dir / "lexicon.tsv");
  out << corpus::format_stats(corpus::corpus_stats(g.records, pipeline::by_id(g.houses))) << "\n";
  return kOk;
}

int cmd_mix(const RunConfig& cfg, const fs::path& corpus_file, std::ostream& out) {
  auto w = load_workspace(cfg, in_run(cfg, corpus_file, "corpus.jsonl"));
  const auto mixed = pipeline::mix_corpus(w.records, w.houses, cfg.mix, w.lexicon, w.vocab);
  auto all = w.records;
  all.insert(all.end(), mixed.records.begin(), mixed.records.end());
  corpus::save_corpus(cfg.output_dir / "corpus_mixed.jsonl", all);
  const auto& t = mixed.tally;
  out << "candidates " << t.candidates << "\n"
      << "rejected (1) node gap " << t.rejected_gap << "\n"
      << "rejected (2) looping " << t.rejected_loop << "\n"
      << "rejected (3) start/end shared " << t.rejected_start_end << "\n"
      << "rejected length window " << t.rejected_length << "\n"
      << "(4) random micro-instruction picks " << t.random_picks << "\n"
      << "accepted " << t.accepted << "\n";
  return kOk;
}

int cmd_train(const RunConfig& cfg, const fs::path& corpus_file, std::ostream& out) {
  const char* fallback = "corpus.jsonl";
  if (!cfg.ablation.empty() && train::find_ablation(cfg.ablation).path_mixing) fallback = "corpus_mixed.jsonl";
  auto w = load_workspace(cfg, in_run(cfg, corpus_file, fallback));
  std::vector<corpus::CorpusRecord> train_recs, eval_recs;
  split(cfg, w.records, train_recs, eval_recs);
  data::FeatureBuilder fb(w.houses, cfg.features, scene_table(cfg));
  const auto train_set = fb.examples(train_recs, w.lexicon);
  const auto eval_set = fb.examples(eval_recs, w.lexicon);
  auto m = make_model(cfg, w.vocab, fb.table());
  out << "parameters " << model::count_parameters(m.params()) << "\n"
      << "train " << train_set.size() << " eval " << eval_set.size() << "\n";
  const auto res = train::fit(m, train_set, eval_set, w.vocab, cfg.train, cfg.output_dir / "train");
  if (!res.history.empty()) {
    const auto& l = res.history.back();
    out << "final lm " << l.lm << " uls " << l.uls << " tal " << l.tal << " total " << l.total << "\n";
  }
  if (res.last_eval) out << metrics::to_json(*res.last_eval).dump() << "\n";
  out << "checkpoint " << res.checkpoint.string() << "\n";
  return kOk;
}

int cmd_arl(const RunConfig& cfg, const fs::path& corpus_file, const fs::path& checkpoint,
            std::ostream& out) {
  auto w = load_workspace(cfg, in_run(cfg, corpus_file, "corpus.jsonl"));
  std::vector<corpus::CorpusRecord> train_recs, eval_recs;
  split(cfg, w.records, train_recs, eval_recs);
  data::FeatureBuilder fb(w.houses, cfg.features, scene_table(cfg));
  const auto examples = fb.examples(train_recs, w.lexicon);
  auto speaker = load_model(cfg, w.vocab, fb.table(), checkpoint);
  const auto words = word_table(cfg, w.vocab);
  auto rcfg = cfg.reward;
  rcfg.embed_dim = words.dim();
  rcfg.visual_dim = speaker.config().hidden_dim;
  arl::RewardModel reward(rcfg, mix_seed(cfg.seed, 5));
  const auto res = arl::arl_fit(speaker, reward, examples, w.vocab, words, cfg.arl, cfg.train,
                                cfg.output_dir / "arl");
  if (!res.curve.empty()) out << arl::to_json(res.curve.back()).dump() << "\n";
  out << "checkpoint " << res.checkpoint.string() << "\n";
  return kOk;
}

int cmd_generate(const RunConfig& cfg, const fs::path& corpus_file, const fs::path& checkpoint,
                 const std::string& record_id, std::ostream& out) {
  auto w = load_workspace(cfg, in_run(cfg, corpus_file, "corpus.jsonl"));
  const corpus::CorpusRecord* rec = nullptr;
  for (const auto& r : w.records) {
    if (r.record_id == record_id) rec = &r;
  }
  if (!rec) throw ConfigError("no record '" + record_id + "' in corpus");
  data::FeatureBuilder fb(w.houses, cfg.features, scene_table(cfg));
  const auto m = load_model(cfg, w.vocab, fb.table(), checkpoint);
  const auto g = m.generate(fb.trajectory(*rec), model::DecodeMode::greedy());
  out << corpus::join(w.vocab.decode(g.tokens)) << "\n";
  std::string csv = "token";
  for (nn::Index t = 0; t < g.attention.cols(); ++t) csv += ",v" + std::to_string(t);
  csv += "\n";
  for (nn::Index i = 0; i < g.attention.rows(); ++i) {
    csv += w.vocab.token(g.tokens[static_cast<std::size_t>(i)]);
    for (nn::Index t = 0; t < g.attention.cols(); ++t) {
      char buf[32];
      std::snprintf(buf, sizeof buf, ",%.6f", g.attention(i, t));
      csv += buf;
    }
    csv += "\n";
  }
  ensure_dir(cfg.output_dir);
  write_text(cfg.output_dir / ("attention_" + record_id + ".csv"), csv);
  return kOk;
}

int cmd_eval(const RunConfig& cfg, const fs::path& corpus_file, const fs::path& checkpoint,
             const fs::path& candidates, std::ostream& out) {
  auto w = load_workspace(cfg, in_run(cfg, corpus_file, "corpus.jsonl"));
  if (w.records.empty()) throw EmptyEval("reference corpus is empty");
  std::vector<metrics::EvalPair> pairs;
  if (!candidates.empty()) {
    std::map<std::string, std::string> cand;
    for (const auto& r : corpus::load_corpus(candidates)) cand[r.record_id] = r.instruction;
    for (const auto& r : w.records) {
      auto it = cand.find(r.record_id);
      if (it == cand.end()) throw ConfigError("candidate corpus lacks record '" + r.record_id + "'");
      pairs.push_back({corpus::tokenize(it->second), {corpus::tokenize(r.instruction)}});
    }
  } else {
    data::FeatureBuilder fb(w.houses, cfg.features, scene_table(cfg));
    const auto m = load_model(cfg, w.vocab, fb.table(), checkpoint);
    for (const auto& r : w.records) {
      const auto g = m.generate(fb.trajectory(r), model::DecodeMode::greedy());
      pairs.push_back({w.vocab.decode(g.tokens), {w.vocab.decode(r.token_ids)}});
    }
  }
  const auto report = metrics::evaluate(pairs);
  ensure_dir(cfg.output_dir);
  write_text(cfg.output_dir / "eval_report.json", metrics::to_json(report).dump(2) + "\n");
  std::vector<corpus::TokenList> generated;
  for (const auto& p : pairs) generated.push_back(p.candidate);
  out << metrics::to_json(report).dump() << "\n"
      << metrics::format_referral(metrics::referral_counts(generated, metrics::ReferralLexicons::defaults()))
      << "\n";
  return kOk;
}

int cmd_stats(const RunConfig& cfg, const fs::path& corpus_file, std::ostream& out) {
  auto w = load_workspace(cfg, in_run(cfg, corpus_file, "corpus.jsonl"));
  out << corpus::format_stats(corpus::corpus_stats(w.records, w.houses)) << "\n";
  std::map<std::string, std::size_t> by_prov;
  std::vector<corpus::TokenList> instr;
  for (const auto& r : w.records) {
    ++by_prov[corpus::to_string(r.provenance)];
    instr.push_back(corpus::tokenize(r.instruction));
  }
  for (const auto& [k, v] : by_prov) out << k << " " << v << "\n";
  out << metrics::format_referral(metrics::referral_counts(instr, metrics::ReferralLexicons::defaults()))
      << "\n";
  return kOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Speaker training and evaluation pipeline"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  std::string corpus_file, checkpoint, candidates, record_id;
  app.add_option("-c,--config", config_path, "JSON run configuration");
  app.add_option("--set", overrides, "Override a config key, e.g. --set train.iterations=100");

  auto* gen = app.add_subcommand("gen", "Generate houses and the silver corpus");
  auto* mix = app.add_subcommand("mix", "Augment a corpus by path mixing");
  auto* trn = app.add_subcommand("train", "Supervised training");
  auto* arl_cmd = app.add_subcommand("arl", "Adversarial reward learning from a checkpoint");
  auto* gen_text = app.add_subcommand("generate", "Greedy instruction for one record");
  auto* eval = app.add_subcommand("eval", "Score decodes or a candidate corpus");
  auto* stats = app.add_subcommand("stats", "Corpus statistics and referral counts");
  for (auto* sub : {mix, trn, arl_cmd, gen_text, eval, stats}) {
    sub->add_option("--corpus", corpus_file, "Corpus JSON-lines file");
  }
  for (auto* sub : {arl_cmd, gen_text, eval}) {
    sub->add_option("--checkpoint", checkpoint, "Speaker parameter archive");
  }
  gen_text->add_option("--record", record_id, "Record id")->required();
  eval->add_option("--candidates", candidates, "Candidate corpus scored against --corpus");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return kConfigError;
  }

  try {
    const RunConfig cfg = load_config(config_path, overrides);
    if (*gen) return cmd_gen(cfg, out);
    if (*mix) return cmd_mix(cfg, corpus_file, out);
    if (*trn) return cmd_train(cfg, corpus_file, out);
    if (*arl_cmd) return cmd_arl(cfg, corpus_file, checkpoint, out);
    if (*gen_text) return cmd_generate(cfg, corpus_file, checkpoint, record_id, out);
    if (*eval) {
      if (checkpoint.empty() == candidates.empty()) {
        throw ConfigError("eval needs exactly one of --checkpoint or --candidates");
      }
      return cmd_eval(cfg, corpus_file, checkpoint, candidates, out);
    }
    if (*stats) return cmd_stats(cfg, corpus_file, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kIoError;
  } catch (const FormatError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kIoError;
  } catch (const ShapeError& e) {
    err << "shape error: " << e.what() << "\n";
    return kShapeError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}

}  // namespace sas::cli
