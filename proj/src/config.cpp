#include "mingle/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "mingle/common.hpp"

namespace mingle {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

using Sections = std::map<std::string, std::map<std::string, std::string>>;

Sections parse_ini(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open config: " + path);
  Sections sections;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw DataError(path + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw DataError(path + ":" + std::to_string(lineno) + ": empty key");
    if (!sections[section].emplace(key, value).second)
      throw DataError(path + ":" + std::to_string(lineno) + ": duplicate key " + key);
  }
  return sections;
}

bool parse_bool(const std::string& v, const std::string& key) {
  std::string s = v;
  std::transform(s.begin(), s.end(), s.begin(), ::tolower);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw DataError("bad boolean for " + key + ": " + v);
}

std::vector<std::string> parse_list(const std::string& v) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= v.size()) {
    size_t p = v.find(',', start);
    std::string item = trim(p == std::string::npos ? v.substr(start) : v.substr(start, p - start));
    if (!item.empty()) out.push_back(item);
    if (p == std::string::npos) break;
    start = p + 1;
  }
  return out;
}

// Pulls a key out of the section map, erasing it so leftovers mean typos.
template <typename F>
void take(std::map<std::string, std::string>& section, const std::string& key, F&& apply) {
  auto it = section.find(key);
  if (it == section.end()) return;
  apply(it->second);
  section.erase(it);
}

}  // namespace

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  Sections sections = parse_ini(path);
  ExperimentConfig cfg;

  auto& data = sections["data"];
  take(data, "source", [&](const std::string& v) { cfg.source = v; });
  take(data, "records", [&](const std::string& v) { cfg.records_path = v; });
  take(data, "codes", [&](const std::string& v) { cfg.codes_path = v; });
  take(data, "notes", [&](const std::string& v) { cfg.notes_path = v; });
  take(data, "n_visits", [&](const std::string& v) { cfg.n_visits = std::stoi(v); });
  take(data, "n_codes", [&](const std::string& v) { cfg.n_codes = std::stoi(v); });
  take(data, "task", [&](const std::string& v) {
    if (v == "binary") cfg.task = TaskKind::binary;
    else if (v == "multilabel-25") cfg.task = TaskKind::multilabel25;
    else throw DataError("bad task: " + v + " (want binary | multilabel-25)");
  });
  take(data, "signal", [&](const std::string& v) { cfg.signal = v; });
  take(data, "positive_rate", [&](const std::string& v) { cfg.positive_rate = std::stod(v); });
  take(data, "generator_seed", [&](const std::string& v) { cfg.generator_seed = std::stoull(v); });
  take(data, "split_seed", [&](const std::string& v) { cfg.split_seed = std::stoull(v); });
  take(data, "stratified", [&](const std::string& v) { cfg.stratified = parse_bool(v, "stratified"); });
  take(data, "textualize_missing",
       [&](const std::string& v) { cfg.textualize_missing = parse_bool(v, "textualize_missing"); });

  auto& emb = sections["embedding"];
  take(emb, "provider", [&](const std::string& v) {
    if (v == "fallback") cfg.provider = ProviderKind::fallback;
    else if (v == "remote") cfg.provider = ProviderKind::remote;
    else throw DataError("bad provider: " + v + " (want fallback | remote)");
  });
  take(emb, "d2", [&](const std::string& v) { cfg.d2 = std::stoi(v); });
  take(emb, "ratio", [&](const std::string& v) { cfg.ratio = std::stod(v); });
  take(emb, "d1", [&](const std::string& v) { cfg.d1 = std::stoi(v); });
  take(emb, "walks_per_node", [&](const std::string& v) { cfg.walks_per_node = std::stoi(v); });
  take(emb, "walk_length", [&](const std::string& v) { cfg.walk_length = std::stoi(v); });
  take(emb, "window", [&](const std::string& v) { cfg.window = std::stoi(v); });
  take(emb, "negatives", [&](const std::string& v) { cfg.negatives = std::stoi(v); });
  take(emb, "sg_epochs", [&](const std::string& v) { cfg.sg_epochs = std::stoi(v); });
  take(emb, "embed_seed", [&](const std::string& v) { cfg.embed_seed = std::stoull(v); });
  take(emb, "blocked_sections", [&](const std::string& v) { cfg.blocked_sections = parse_list(v); });
  take(emb, "cache", [&](const std::string& v) { cfg.cache_path = v; });
  take(emb, "endpoint", [&](const std::string& v) { cfg.endpoint = v; });
  take(emb, "model", [&](const std::string& v) { cfg.model_name = v; });
  take(emb, "api_key_env", [&](const std::string& v) { cfg.api_key_env = v; });
  take(emb, "batch_size", [&](const std::string& v) { cfg.batch_size = std::stoi(v); });
  take(emb, "timeout_ms", [&](const std::string& v) { cfg.timeout_ms = std::stoi(v); });
  take(emb, "retries", [&](const std::string& v) { cfg.retries = std::stoi(v); });
  take(emb, "max_text_chars", [&](const std::string& v) { cfg.max_text_chars = std::stoi(v); });

  auto& mdl = sections["model"];
  take(mdl, "d", [&](const std::string& v) { cfg.d = std::stoi(v); });
  take(mdl, "layers", [&](const std::string& v) { cfg.layers = std::stoi(v); });
  take(mdl, "heads", [&](const std::string& v) { cfg.heads = std::stoi(v); });
  take(mdl, "model_seed", [&](const std::string& v) { cfg.model_seed = std::stoull(v); });

  auto& trn = sections["train"];
  take(trn, "lr", [&](const std::string& v) { cfg.train_cfg.lr = std::stod(v); });
  take(trn, "weight_decay", [&](const std::string& v) { cfg.train_cfg.weight_decay = std::stod(v); });
  take(trn, "max_epochs", [&](const std::string& v) { cfg.train_cfg.max_epochs = std::stoi(v); });
  take(trn, "patience", [&](const std::string& v) { cfg.train_cfg.patience = std::stoi(v); });
  take(trn, "seeds", [&](const std::string& v) { cfg.train_cfg.n_seeds = std::stoi(v); });
  take(trn, "seed_base", [&](const std::string& v) { cfg.train_cfg.seed_base = std::stoull(v); });
  take(trn, "variants", [&](const std::string& v) { cfg.variants = v; });

  auto& outp = sections["output"];
  take(outp, "dir", [&](const std::string& v) { cfg.out_dir = v; });

  for (const auto& [section, keys] : sections) {
    if (keys.empty()) continue;
    if (section != "data" && section != "embedding" && section != "model" && section != "train" &&
        section != "output")
      throw DataError("unknown config section: [" + section + "]");
    throw DataError("unknown config key in [" + section + "]: " + keys.begin()->first);
  }

  cfg.finalize();
  return cfg;
}

void ExperimentConfig::finalize() {
  if (d1 == 0) d1 = static_cast<int>(std::lround(ratio * d2));
  if (d1 < 1 || d2 < 1) throw DataError("embedding dims must be >= 1 (d1=" + std::to_string(d1) + ")");
  if (source != "synthetic" && source != "files")
    throw DataError("bad data source: " + source + " (want synthetic | files)");
  if (source == "files" && (records_path.empty() || codes_path.empty()))
    throw DataError("files source needs records and codes paths");
  if (variants != "full" && variants != "ablations" && variants != "all")
    throw DataError("bad variants: " + variants + " (want full | ablations | all)");
  if (provider == ProviderKind::remote && endpoint.empty())
    throw DataError("remote provider needs an endpoint");
  if (out_dir.empty()) throw DataError("output dir must not be empty");
  if (cache_path.empty()) cache_path = out_dir + "/embed_cache.tsv";
  model_config().validate();
  train_cfg.validate();
}

model::ModelConfig ExperimentConfig::model_config() const {
  model::ModelConfig cfg;
  cfg.d = d;
  cfg.layers = layers;
  cfg.heads = heads;
  cfg.d1 = d1;
  cfg.d2 = d2;
  cfg.task = task;
  cfg.seed = model_seed;
  return cfg;
}

ProviderConfig ExperimentConfig::provider_config() const {
  ProviderConfig p;
  p.kind = provider;
  p.d2 = d2;
  p.seed = embed_seed;
  p.endpoint = endpoint;
  p.model = model_name;
  p.api_key_env = api_key_env;
  p.batch_size = batch_size;
  p.timeout_ms = timeout_ms;
  p.retries = retries;
  p.cache_path = cache_path;
  p.max_text_chars = max_text_chars;
  return p;
}

SignalSpec ExperimentConfig::signal_spec() const {
  SignalSpec spec = SignalSpec::parse(signal);
  spec.positive_rate = positive_rate;
  return spec;
}

std::vector<std::string> ExperimentConfig::variant_list() const {
  if (variants == "full") return {"full"};
  if (variants == "all") return train::all_variants();
  return train::ablation_variants();
}

std::string ExperimentConfig::records_file() const {
  return source == "files" ? records_path : out_dir + "/records.tsv";
}

std::string ExperimentConfig::codes_file() const {
  return source == "files" ? codes_path : out_dir + "/codes.tsv";
}

std::string ExperimentConfig::notes_file() const {
  return source == "files" ? notes_path : out_dir + "/notes.tsv";
}

const std::string& config_key_help() {
  static const std::string help = R"(Config file keys (INI sections, key = value, '#' comments):

[data]
  source          synthetic | files (default synthetic)
  records         records file path (files source)
  codes           codes file path (files source)
  notes           notes file path (files source, optional)
  n_visits        synthetic visit count (default 2000)
  n_codes         synthetic code count (default 200)
  task            binary | multilabel-25 (default binary)
  signal          structure-only | semantics-only | mixed (default mixed)
  positive_rate   planted positive rate in (0,1) (default 0.5)
  generator_seed  synthetic generator seed (default 7)
  split_seed      70/10/20 split shuffle seed (default 0)
  stratified      stratify split by first label (default false)
  textualize_missing  fill empty notes from concept names (default false)

[embedding]
  provider        fallback | remote (default fallback)
  d2              semantic embedding width (default 32)
  ratio           structural:semantic width ratio; d1 = round(ratio*d2)
  d1              structural width override (0 = use ratio)
  walks_per_node  random walks started per node (default 10)
  walk_length     nodes per walk (default 20)
  window          skip-gram window (default 5)
  negatives       negative samples per pair (default 5)
  sg_epochs       skip-gram epochs (default 5)
  embed_seed      walks/skip-gram/fallback seed (default 17)
  blocked_sections comma list of note section headers to drop
                  (default "Admission Date, Service")
  cache           embedding cache path (default <out_dir>/embed_cache.tsv)
  endpoint        remote embeddings URL (remote provider)
  model           remote model name
  api_key_env     env var holding the API key (default MINGLE_API_KEY)
  batch_size      remote batch size (default 16)
  timeout_ms      remote timeout (default 30000)
  retries         remote retries (default 3)
  max_text_chars  truncation budget per text (default 20000)

[model]
  d               hidden width, divisible by heads (default 32)
  layers          message passing layers, 1..4 (default 1)
  heads           attention heads (default 4)
  model_seed      parameter init seed (default 1)

[train]
  lr              Adam learning rate (default 1e-3)
  weight_decay    decoupled weight decay (default 1e-3)
  max_epochs      epoch budget (default 200)
  patience        early-stop patience on val AUROC (default 20)
  seeds           runs per variant (default 5)
  seed_base       first run seed (default 1)
  variants        full | ablations | all (default ablations)

[output]
  dir             artifact directory (default runs/exp)
)";
  return help;
}

}  // namespace mingle
