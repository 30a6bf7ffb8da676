#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mingle/data.hpp"

namespace mingle {

enum class TableKind { structural, concepts, note };

const char* table_kind_name(TableKind k);

struct EmbeddingTable {
  TableKind kind = TableKind::structural;
  int dim = 0;
  std::vector<std::string> keys;
  std::vector<std::vector<double>> rows;
  std::unordered_map<std::string, int> index;

  void add(const std::string& key, std::vector<double> v);
  bool has(const std::string& key) const { return index.count(key) != 0; }
  const std::vector<double>& row(const std::string& key) const;
  size_t size() const { return keys.size(); }

  // Dump format: "# kind=<kind> dim=<dim>" header, then key<TAB>floats.
  void save(const std::string& path) const;
  static EmbeddingTable load(const std::string& path);
};

// Persistent embedding cache, one line per entry:
//   sha256(kind|provider|model|text) <TAB> dim <TAB> comma-separated floats
class EmbeddingCache {
 public:
  EmbeddingCache() = default;
  explicit EmbeddingCache(std::string path);

  std::optional<std::vector<double>> lookup(const std::string& hash, int dim) const;
  void store(const std::string& hash, const std::vector<double>& v);

  const std::string& path() const { return path_; }
  size_t entries() const { return entries_.size(); }

 private:
  std::string path_;
  std::unordered_map<std::string, std::vector<double>> entries_;
  mutable std::mutex write_mutex_;
};

enum class ProviderKind { fallback, remote };

struct ProviderConfig {
  ProviderKind kind = ProviderKind::fallback;
  int d2 = 32;
  uint64_t seed = 17;  // fallback token vectors and the remote projection map

  // remote only
  std::string endpoint;     // e.g. http://host:port/v1/embeddings
  std::string model;        // model name sent with each request
  std::string api_key_env;  // name of the env var holding the credential
  int batch_size = 16;
  int timeout_ms = 30000;
  int retries = 3;
  int backoff_ms = 200;

  std::string cache_path;       // empty = no persistent cache
  int max_text_chars = 20000;   // longer inputs are truncated with a warning
};

// Text-embedding provider with a deterministic offline fallback. The fallback
// maps each whitespace token to a seeded unit vector, averages and
// L2-normalizes; empty text gets the zero vector. The remote kind batches
// requests to an embeddings endpoint and projects raw vectors to d2 with a
// seeded fixed linear map.
class EmbeddingProvider {
 public:
  explicit EmbeddingProvider(ProviderConfig cfg);

  EmbeddingTable embed_texts(TableKind kind,
                             const std::vector<std::pair<std::string, std::string>>& keyed_texts);

  int remote_calls() const { return remote_calls_; }
  int cache_hits() const { return cache_hits_; }
  int truncations() const { return truncations_; }
  const ProviderConfig& config() const { return cfg_; }

  std::vector<double> fallback_vector(const std::string& text) const;

 private:
  std::string cache_key(TableKind kind, const std::string& text) const;
  std::vector<std::vector<double>> remote_batch(const std::vector<std::string>& texts,
                                                const std::vector<std::string>& keys);
  const std::vector<double>& projection_matrix(int raw_dim);

  ProviderConfig cfg_;
  EmbeddingCache cache_;
  int remote_calls_ = 0;
  int cache_hits_ = 0;
  int truncations_ = 0;
  std::unordered_map<int, std::vector<double>> projections_;  // raw_dim -> raw_dim x d2
};

EmbeddingTable embed_concepts(EmbeddingProvider& provider, const Dataset& ds);

EmbeddingTable embed_notes(EmbeddingProvider& provider, const Dataset& ds,
                           const std::vector<std::string>& blocked_sections);

}  // namespace mingle
