#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sas/arl.hpp"
#include "sas/dataset.hpp"
#include "sas/model.hpp"
#include "sas/path_mix.hpp"
#include "sas/pipeline.hpp"
#include "sas/train.hpp"

namespace sas::cli {

enum ExitCode { kOk = 0, kFailure = 1, kConfigError = 2, kIoError = 3, kShapeError = 4 };

struct RunConfig {
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "run";
  pipeline::GenConfig gen;
  data::FeatureConfig features;
  std::string embeddings_file;
  corpus::PathMixConfig mix;
  model::ModelConfig model;
  train::TrainConfig train;
  double eval_fraction = 0.125;
  std::string ablation;
  arl::ArlConfig arl;
  arl::RewardModelConfig reward;
};

/// Full document with every key at its default; also serves as the schema.
nlohmann::json default_config_json();
nlohmann::json to_json(const RunConfig& c);

/// Overlays `user` on the defaults, rejecting keys the schema does not know.
RunConfig parse_config(const nlohmann::json& user);

/// Applies "a.b=value"; the value is read as JSON when it parses, else as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Reads the optional config file, applies overrides and SAS_SEED.
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides);

struct Workspace {
  std::map<std::string, envsim::House> houses;
  std::vector<corpus::CorpusRecord> records;
  corpus::Vocabulary vocab;
  corpus::PosLexicon lexicon;
};

Workspace load_workspace(const RunConfig& cfg, const std::filesystem::path& corpus_file);

int cmd_gen(const RunConfig& cfg, std::ostream& out);
int cmd_mix(const RunConfig& cfg, const std::filesystem::path& corpus_file, std::ostream& out);
int cmd_train(const RunConfig& cfg, const std::filesystem::path& corpus_file, std::ostream& out);
int cmd_arl(const RunConfig& cfg, const std::filesystem::path& corpus_file,
            const std::filesystem::path& checkpoint, std::ostream& out);
int cmd_generate(const RunConfig& cfg, const std::filesystem::path& corpus_file,
                 const std::filesystem::path& checkpoint, const std::string& record_id,
                 std::ostream& out);
/// Scores either model decodes (`checkpoint`) or a candidate corpus matched by record id.
int cmd_eval(const RunConfig& cfg, const std::filesystem::path& corpus_file,
             const std::filesystem::path& checkpoint, const std::filesystem::path& candidates,
             std::ostream& out);
int cmd_stats(const RunConfig& cfg, const std::filesystem::path& corpus_file, std::ostream& out);

/// Parses argv-style arguments (without the program name) and runs one command.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sas::cli
