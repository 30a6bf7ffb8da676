#pragma once

#include <map>
#include <string>
#include <vector>

#include "mingle/data.hpp"
#include "mingle/deepwalk.hpp"
#include "mingle/embedding.hpp"
#include "mingle/model.hpp"
#include "mingle/train.hpp"

namespace mingle {

// Flat INI-style experiment config: [section] headers, key = value lines,
// '#' comments. Unknown keys are rejected. Every key is documented in the CLI
// --help footer (config_key_help()).
struct ExperimentConfig {
  // [data]
  std::string source = "synthetic";  // synthetic | files
  std::string records_path, codes_path, notes_path;
  int n_visits = 2000;
  int n_codes = 200;
  TaskKind task = TaskKind::binary;
  std::string signal = "mixed";
  double positive_rate = 0.5;
  uint64_t generator_seed = 7;
  uint64_t split_seed = 0;
  bool stratified = false;
  bool textualize_missing = false;  // synthesize note_text from concept names

  // [embedding]
  ProviderKind provider = ProviderKind::fallback;
  int d2 = 32;
  double ratio = 1.0;  // d1 = round(ratio * d2) unless d1 set explicitly
  int d1 = 0;          // 0 = derive from ratio
  int walks_per_node = 10;
  int walk_length = 20;
  int window = 5;
  int negatives = 5;
  int sg_epochs = 5;
  uint64_t embed_seed = 17;
  std::vector<std::string> blocked_sections = {"Admission Date", "Service"};
  std::string cache_path;  // default: <out_dir>/embed_cache.tsv
  std::string endpoint, model_name;
  std::string api_key_env = "MINGLE_API_KEY";
  int batch_size = 16;
  int timeout_ms = 30000;
  int retries = 3;
  int max_text_chars = 20000;

  // [model]
  int d = 32;
  int layers = 1;
  int heads = 4;
  uint64_t model_seed = 1;

  // [train]
  train::TrainConfig train_cfg;
  std::string variants = "ablations";  // full | ablations | all

  // [output]
  std::string out_dir = "runs/exp";

  static ExperimentConfig from_file(const std::string& path);
  void finalize();  // derives d1 from ratio, applies defaults, validates

  int derived_d1() const { return d1; }
  model::ModelConfig model_config() const;
  ProviderConfig provider_config() const;
  SignalSpec signal_spec() const;
  std::vector<std::string> variant_list() const;

  std::string records_file() const;
  std::string codes_file() const;
  std::string notes_file() const;
};

const std::string& config_key_help();

}  // namespace mingle
