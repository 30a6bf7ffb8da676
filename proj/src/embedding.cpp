#include "mingle/embedding.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "mingle/common.hpp"
#include "mingle/mat.hpp"
#include "mingle/sha256.hpp"

namespace mingle {

const char* table_kind_name(TableKind k) {
  switch (k) {
    case TableKind::structural: return "structural";
    case TableKind::concepts: return "concept";
    case TableKind::note: return "note";
  }
  return "?";
}

namespace {

TableKind parse_kind(const std::string& s) {
  if (s == "structural") return TableKind::structural;
  if (s == "concept") return TableKind::concepts;
  if (s == "note") return TableKind::note;
  throw DataError("unknown embedding table kind: " + s);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<double> parse_floats(const std::string& s, const std::string& where) {
  std::vector<double> out;
  const char* p = s.c_str();
  char* end = nullptr;
  while (*p) {
    double v = std::strtod(p, &end);
    if (end == p) throw DataError("bad float list at " + where);
    out.push_back(v);
    p = end;
    if (*p == ',') ++p;
  }
  return out;
}

void check_finite(const std::vector<double>& v, const std::string& key) {
  for (double x : v)
    if (!std::isfinite(x)) throw NumericError("non-finite embedding value for key: " + key);
}

}  // namespace

void EmbeddingTable::add(const std::string& key, std::vector<double> v) {
  if (static_cast<int>(v.size()) != dim)
    throw DataError("embedding row for " + key + " has dim " + std::to_string(v.size()) + ", table dim " +
                    std::to_string(dim));
  if (!index.emplace(key, static_cast<int>(keys.size())).second)
    throw DataError("duplicate embedding key: " + key);
  check_finite(v, key);
  keys.push_back(key);
  rows.push_back(std::move(v));
}

const std::vector<double>& EmbeddingTable::row(const std::string& key) const {
  auto it = index.find(key);
  if (it == index.end()) throw DataError("missing embedding key: " + key);
  return rows[it->second];
}

void EmbeddingTable::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "# kind=" << table_kind_name(kind) << " dim=" << dim << "\n";
  for (size_t i = 0; i < keys.size(); ++i) {
    out << keys[i] << '\t';
    for (size_t j = 0; j < rows[i].size(); ++j) out << (j ? "," : "") << format_double(rows[i][j]);
    out << '\n';
  }
}

EmbeddingTable EmbeddingTable::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embedding table: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty embedding table: " + path);
  EmbeddingTable t;
  if (line.rfind("# kind=", 0) != 0) throw DataError("missing table header in " + path);
  size_t sp = line.find(" dim=");
  if (sp == std::string::npos) throw DataError("missing dim in table header of " + path);
  t.kind = parse_kind(line.substr(7, sp - 7));
  t.dim = std::stoi(line.substr(sp + 5));
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos) throw DataError(path + " row " + std::to_string(lineno) + ": no tab");
    t.add(line.substr(0, tab),
          parse_floats(line.substr(tab + 1), path + " row " + std::to_string(lineno)));
  }
  return t;
}

EmbeddingCache::EmbeddingCache(std::string path) : path_(std::move(path)) {
  if (path_.empty()) return;
  std::ifstream in(path_, std::ios::binary);
  if (!in) return;  // cache starts empty
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    size_t t1 = line.find('\t');
    size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw DataError(path_ + " row " + std::to_string(lineno) + ": bad cache line");
    std::string hash = line.substr(0, t1);
    int dim = std::stoi(line.substr(t1 + 1, t2 - t1 - 1));
    auto vec = parse_floats(line.substr(t2 + 1), path_ + " row " + std::to_string(lineno));
    if (static_cast<int>(vec.size()) != dim)
      throw DataError(path_ + " row " + std::to_string(lineno) + ": dim mismatch");
    entries_[hash] = std::move(vec);
  }
}

std::optional<std::vector<double>> EmbeddingCache::lookup(const std::string& hash, int dim) const {
  auto it = entries_.find(hash);
  if (it == entries_.end() || static_cast<int>(it->second.size()) != dim) return std::nullopt;
  return it->second;
}

void EmbeddingCache::store(const std::string& hash, const std::vector<double>& v) {
  std::lock_guard<std::mutex> lock(write_mutex_);
  if (!entries_.emplace(hash, v).second) return;
  if (path_.empty()) return;
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw DataError("cannot append to cache: " + path_);
  out << hash << '\t' << v.size() << '\t';
  for (size_t j = 0; j < v.size(); ++j) out << (j ? "," : "") << format_double(v[j]);
  out << '\n';
}

EmbeddingProvider::EmbeddingProvider(ProviderConfig cfg)
    : cfg_(std::move(cfg)), cache_(cfg_.cache_path) {
  if (cfg_.d2 < 1) throw DataError("provider target dimension must be >= 1");
}

std::string EmbeddingProvider::cache_key(TableKind kind, const std::string& text) const {
  std::string provider = cfg_.kind == ProviderKind::fallback ? "fallback" : "remote";
  return sha256_hex(std::string(table_kind_name(kind)) + "|" + provider + "|" + cfg_.model + "|" + text);
}

std::vector<double> EmbeddingProvider::fallback_vector(const std::string& text) const {
  const int d = cfg_.d2;
  std::vector<double> acc(d, 0.0);
  size_t n_tokens = 0;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) {
      std::string_view token(text.data() + i, j - i);
      std::mt19937_64 g(mix64(cfg_.seed, fnv1a64(token)));
      std::vector<double> t(d);
      double norm = 0.0;
      for (int k = 0; k < d; ++k) {
        t[k] = normal01(g);
        norm += t[k] * t[k];
      }
      norm = std::sqrt(norm);
      if (norm > 0.0)
        for (int k = 0; k < d; ++k) acc[k] += t[k] / norm;
      ++n_tokens;
    }
    i = j;
  }
  if (n_tokens == 0) return std::vector<double>(d, 0.0);
  for (double& x : acc) x /= static_cast<double>(n_tokens);
  double norm = l2_norm(acc);
  if (norm < 1e-300) return std::vector<double>(d, 0.0);
  for (double& x : acc) x /= norm;
  return acc;
}

EmbeddingTable EmbeddingProvider::embed_texts(
    TableKind kind, const std::vector<std::pair<std::string, std::string>>& keyed_texts) {
  EmbeddingTable table;
  table.kind = kind;
  table.dim = cfg_.d2;

  struct Pending {
    int slot;
    std::string key;
    std::string text;
    std::string hash;
  };
  std::vector<std::vector<double>> slots(keyed_texts.size());
  std::vector<Pending> pending;

  for (size_t i = 0; i < keyed_texts.size(); ++i) {
    const auto& [key, raw_text] = keyed_texts[i];
    if (raw_text.empty()) {
      slots[i].assign(cfg_.d2, 0.0);
      continue;
    }
    std::string text = raw_text;
    if (static_cast<int>(text.size()) > cfg_.max_text_chars) {
      text.resize(cfg_.max_text_chars);
      ++truncations_;
    }
    std::string hash = cache_key(kind, text);
    if (auto hit = cache_.lookup(hash, cfg_.d2)) {
      ++cache_hits_;
      slots[i] = std::move(*hit);
      continue;
    }
    pending.push_back({static_cast<int>(i), key, std::move(text), std::move(hash)});
  }

  if (cfg_.kind == ProviderKind::fallback) {
#pragma omp parallel for schedule(static)
    for (size_t p = 0; p < pending.size(); ++p) slots[pending[p].slot] = fallback_vector(pending[p].text);
    for (const auto& p : pending) cache_.store(p.hash, slots[p.slot]);
  } else {
    size_t done = 0;
    while (done < pending.size()) {
      size_t batch_end = std::min(done + static_cast<size_t>(cfg_.batch_size), pending.size());
      std::vector<std::string> texts, keys;
      for (size_t p = done; p < batch_end; ++p) {
        texts.push_back(pending[p].text);
        keys.push_back(pending[p].key);
      }
      std::vector<std::string> remaining_keys;
      for (size_t p = done; p < pending.size(); ++p) remaining_keys.push_back(pending[p].key);
      std::vector<std::vector<double>> vecs;
      try {
        vecs = remote_batch(texts, keys);
      } catch (ProviderError& e) {
        e.failed_keys = std::move(remaining_keys);
        throw;
      }
      for (size_t p = done; p < batch_end; ++p) {
        slots[pending[p].slot] = std::move(vecs[p - done]);
        cache_.store(pending[p].hash, slots[pending[p].slot]);
      }
      done = batch_end;
    }
  }

  for (size_t i = 0; i < keyed_texts.size(); ++i) table.add(keyed_texts[i].first, std::move(slots[i]));
  return table;
}

const std::vector<double>& EmbeddingProvider::projection_matrix(int raw_dim) {
  auto it = projections_.find(raw_dim);
  if (it != projections_.end()) return it->second;
  std::mt19937_64 g(mix64(cfg_.seed, 0xBEEF, static_cast<uint64_t>(raw_dim)));
  std::vector<double> proj(static_cast<size_t>(raw_dim) * cfg_.d2);
  double scale = 1.0 / std::sqrt(static_cast<double>(raw_dim));
  for (double& x : proj) x = normal01(g) * scale;
  return projections_.emplace(raw_dim, std::move(proj)).first->second;
}

std::vector<std::vector<double>> EmbeddingProvider::remote_batch(const std::vector<std::string>& texts,
                                                                 const std::vector<std::string>& keys) {
  size_t scheme_end = cfg_.endpoint.find("://");
  if (scheme_end == std::string::npos) throw ProviderError("bad endpoint URL: " + cfg_.endpoint);
  size_t path_start = cfg_.endpoint.find('/', scheme_end + 3);
  std::string base = path_start == std::string::npos ? cfg_.endpoint : cfg_.endpoint.substr(0, path_start);
  std::string path = path_start == std::string::npos ? "/" : cfg_.endpoint.substr(path_start);

  nlohmann::json body;
  body["model"] = cfg_.model;
  body["input"] = texts;
  std::string payload = body.dump();

  httplib::Headers headers;
  if (!cfg_.api_key_env.empty()) {
    const char* key = std::getenv(cfg_.api_key_env.c_str());
    if (key && *key) headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.backoff_ms * attempt));
    httplib::Client client(base);
    client.set_connection_timeout(0, cfg_.timeout_ms * 1000);
    client.set_read_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);
    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "http status " + std::to_string(res->status);
      continue;
    }
    try {
      auto parsed = nlohmann::json::parse(res->body);
      const auto& data = parsed.at("data");
      if (data.size() != texts.size())
        throw ProviderError("endpoint returned " + std::to_string(data.size()) + " rows for " +
                            std::to_string(texts.size()) + " inputs");
      std::vector<std::vector<double>> raw(texts.size());
      for (const auto& item : data) {
        size_t idx = item.at("index").get<size_t>();
        if (idx >= raw.size()) throw ProviderError("endpoint returned out-of-range index");
        raw[idx] = item.at("embedding").get<std::vector<double>>();
      }
      ++remote_calls_;
      int raw_dim = raw.empty() ? 0 : static_cast<int>(raw[0].size());
      if (raw_dim <= 0) throw ProviderError("endpoint returned empty embeddings");
      std::vector<std::vector<double>> out(raw.size());
      const std::vector<double>& proj = projection_matrix(raw_dim);
      for (size_t r = 0; r < raw.size(); ++r) {
        if (static_cast<int>(raw[r].size()) != raw_dim)
          throw ProviderError("endpoint returned inconsistent embedding dims");
        std::vector<double> y(cfg_.d2, 0.0);
        for (int i = 0; i < raw_dim; ++i) {
          double x = raw[r][i];
          if (x == 0.0) continue;
          const double* prow = proj.data() + static_cast<size_t>(i) * cfg_.d2;
          for (int j = 0; j < cfg_.d2; ++j) y[j] += x * prow[j];
        }
        double norm = l2_norm(y);
        if (norm > 0.0)
          for (double& x : y) x /= norm;
        check_finite(y, keys[r]);
        out[r] = std::move(y);
      }
      return out;
    } catch (const ProviderError&) {
      throw;
    } catch (const std::exception& e) {
      last_error = std::string("bad response: ") + e.what();
    }
  }
  throw ProviderError("embedding endpoint failed after " + std::to_string(cfg_.retries + 1) +
                      " attempts (" + last_error + ")");
}

EmbeddingTable embed_concepts(EmbeddingProvider& provider, const Dataset& ds) {
  std::vector<std::pair<std::string, std::string>> texts;
  texts.reserve(ds.codes.size());
  for (const auto& c : ds.codes) texts.emplace_back(c.code_id, c.concept_name);
  return provider.embed_texts(TableKind::concepts, texts);
}

EmbeddingTable embed_notes(EmbeddingProvider& provider, const Dataset& ds,
                           const std::vector<std::string>& blocked_sections) {
  std::vector<std::pair<std::string, std::string>> texts;
  texts.reserve(ds.visits.size());
  for (const auto& v : ds.visits)
    texts.emplace_back(v.visit_id, filter_note_sections(v.note_text, blocked_sections));
  return provider.embed_texts(TableKind::note, texts);
}

}  // namespace mingle
