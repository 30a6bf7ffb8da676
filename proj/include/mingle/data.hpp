#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace mingle {

// Multimodal EHR-style dataset: structured visit records (sets of medical
// codes), optional free-text notes, and binary or 25-way multilabel targets.
//
// File formats (UTF-8, tab-separated, one record per line):
//   records: visit_id <TAB> label_spec <TAB> code_id,code_id,...
//            label_spec is "0"/"1" or a string of 25 binary digits
//   codes:   code_id <TAB> system <TAB> concept_name
//   notes:   visit_id <TAB> note_text   (newlines/tabs escaped as \n \t \\)
// Loaders reject duplicate keys.

struct MedicalCode {
  std::string code_id;
  std::string system;
  std::string concept_name;
};

enum class TaskKind { binary, multilabel25 };

inline int label_arity(TaskKind k) { return k == TaskKind::binary ? 1 : 25; }

enum class SplitTag : uint8_t { none = 0, train, val, test };

struct VisitRecord {
  std::string visit_id;
  std::vector<std::string> codes;  // sorted, unique
  std::string note_text;
  std::vector<uint8_t> label;  // length 1 or 25
};

struct Dataset {
  std::vector<MedicalCode> codes;  // registry order
  std::vector<VisitRecord> visits;
  TaskKind task = TaskKind::binary;
  std::unordered_map<std::string, SplitTag> splits;  // visit_id -> split

  std::unordered_map<std::string, int> code_index;   // code_id -> registry pos
  std::unordered_map<std::string, int> visit_index;  // visit_id -> visits pos

  void rebuild_indexes();
  const MedicalCode& code(const std::string& code_id) const;
  SplitTag split_of(const std::string& visit_id) const;
};

Dataset load_dataset(const std::string& records_path, const std::string& codes_path,
                     const std::optional<std::string>& notes_path = std::nullopt);

void save_dataset(const Dataset& ds, const std::string& records_path, const std::string& codes_path,
                  const std::string& notes_path);

// Deterministic shuffle, then 70/10/20 assignment: |val| = floor(0.1 P),
// |test| = floor(0.2 P), remainder to train. Requires >= 10 visits.
// Stratified mode balances positives of the first label across splits.
Dataset split_dataset(const Dataset& ds, uint64_t seed, bool stratified = false);

// "Patient visit with: <name>; <name>; ..." with names in registry order.
std::string textualize_visit(const VisitRecord& v, const Dataset& registry);

// Removes every section whose header matches a blocked name (case-insensitive,
// line-anchored, colon-terminated) up to the next recognized header or EOF.
std::string filter_note_sections(const std::string& note, const std::vector<std::string>& blocked_sections);

// Planted-signal synthetic generator. Labels are driven by three disjoint
// per-visit channels so ablated models are measurably weaker than fusion:
//   structure: a designated code pair co-occurs  <-> positive
//   concept:   a code from a name-marked family is present <-> positive
//              (family members are individually rare; decoy family on negatives)
//   note:      a trigger phrase appears in the visit note <-> positive
struct SignalSpec {
  double w_structure = 0.0;
  double w_concept = 0.0;
  double w_note = 0.0;
  double positive_rate = 0.5;

  static SignalSpec structure_only() { return {1.0, 0.0, 0.0, 0.5}; }
  static SignalSpec semantics_only() { return {0.0, 0.0, 1.0, 0.5}; }
  static SignalSpec mixed() { return {0.34, 0.33, 0.33, 0.5}; }
  static SignalSpec parse(const std::string& name);
};

struct SyntheticInfo {
  std::vector<std::string> structure_pair;    // the label-determining code pair
  std::vector<std::string> marker_codes;      // concept-channel positive family
  std::vector<std::string> decoy_codes;       // concept-channel negative family
  std::string trigger_phrase;                 // note-channel marker
};

Dataset generate_synthetic_dataset(int n_visits, int n_codes, TaskKind task, const SignalSpec& spec,
                                   uint64_t seed, SyntheticInfo* info = nullptr);

// Escaping helpers for the notes file format.
std::string escape_note_text(const std::string& s);
std::string unescape_note_text(const std::string& s);

}  // namespace mingle
