#include "mingle/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <optional>
#include <sstream>

#include "mingle/common.hpp"

namespace mingle {

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t p = s.find(sep, start);
    if (p == std::string::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, p - start));
    start = p + 1;
  }
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<uint8_t> parse_label_spec(const std::string& spec, const std::string& where) {
  std::vector<uint8_t> label;
  if (spec.size() != 1 && spec.size() != 25)
    throw DataError("bad label spec (want 1 or 25 binary digits) at " + where);
  for (char c : spec) {
    if (c != '0' && c != '1') throw DataError("bad label digit '" + std::string(1, c) + "' at " + where);
    label.push_back(c == '1' ? 1 : 0);
  }
  return label;
}

std::string format_label(const std::vector<uint8_t>& label) {
  std::string s;
  for (uint8_t b : label) s.push_back(b ? '1' : '0');
  return s;
}

// A recognized section header is line-anchored: the line starts with a letter
// and reaches a ':' within 48 chars through [A-Za-z0-9 ./_-] only.
std::optional<std::string> header_name(const std::string& line) {
  if (line.empty() || !std::isalpha(static_cast<unsigned char>(line[0]))) return std::nullopt;
  size_t limit = std::min(line.size(), static_cast<size_t>(48));
  for (size_t j = 0; j < limit; ++j) {
    char c = line[j];
    if (c == ':') return trim(line.substr(0, j));
    bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == ' ' || c == '.' || c == '/' ||
              c == '_' || c == '-';
    if (!ok) return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace

void Dataset::rebuild_indexes() {
  code_index.clear();
  visit_index.clear();
  for (size_t i = 0; i < codes.size(); ++i) {
    if (!code_index.emplace(codes[i].code_id, static_cast<int>(i)).second)
      throw DataError("duplicate code_id in registry: " + codes[i].code_id);
  }
  for (size_t i = 0; i < visits.size(); ++i) {
    if (!visit_index.emplace(visits[i].visit_id, static_cast<int>(i)).second)
      throw DataError("duplicate visit_id: " + visits[i].visit_id);
  }
}

const MedicalCode& Dataset::code(const std::string& code_id) const {
  auto it = code_index.find(code_id);
  if (it == code_index.end()) throw DataError("unknown code_id: " + code_id);
  return codes[it->second];
}

SplitTag Dataset::split_of(const std::string& visit_id) const {
  auto it = splits.find(visit_id);
  return it == splits.end() ? SplitTag::none : it->second;
}

Dataset load_dataset(const std::string& records_path, const std::string& codes_path,
                     const std::optional<std::string>& notes_path) {
  Dataset ds;

  int lineno = 0;
  for (const std::string& line : read_lines(codes_path)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_on(line, '\t');
    if (fields.size() != 3)
      throw DataError("codes file row " + std::to_string(lineno) + ": want 3 tab-separated fields");
    if (fields[0].empty()) throw DataError("codes file row " + std::to_string(lineno) + ": empty code_id");
    if (fields[2].empty())
      throw DataError("codes file row " + std::to_string(lineno) + ": empty concept_name for " + fields[0]);
    ds.codes.push_back({fields[0], fields[1], fields[2]});
  }

  std::unordered_map<std::string, int> code_ids;
  for (size_t i = 0; i < ds.codes.size(); ++i) {
    if (!code_ids.emplace(ds.codes[i].code_id, static_cast<int>(i)).second)
      throw DataError("duplicate code_id in codes file: " + ds.codes[i].code_id);
  }

  int arity = -1;
  lineno = 0;
  for (const std::string& line : read_lines(records_path)) {
    ++lineno;
    if (line.empty()) continue;
    std::string where = "records row " + std::to_string(lineno);
    auto fields = split_on(line, '\t');
    if (fields.size() != 3) throw DataError(where + ": want 3 tab-separated fields");
    VisitRecord v;
    v.visit_id = fields[0];
    if (v.visit_id.empty()) throw DataError(where + ": empty visit_id");
    v.label = parse_label_spec(fields[1], where);
    if (arity == -1)
      arity = static_cast<int>(v.label.size());
    else if (arity != static_cast<int>(v.label.size()))
      throw DataError(where + ": label arity mismatch (saw " + std::to_string(v.label.size()) +
                      ", expected " + std::to_string(arity) + ")");
    if (fields[2].empty()) throw DataError(where + ": empty visit (" + v.visit_id + ")");
    for (const std::string& cid : split_on(fields[2], ',')) {
      if (cid.empty()) throw DataError(where + ": empty code_id entry");
      if (!code_ids.count(cid)) throw DataError(where + ": unresolvable code_id " + cid);
      v.codes.push_back(cid);
    }
    std::sort(v.codes.begin(), v.codes.end());
    v.codes.erase(std::unique(v.codes.begin(), v.codes.end()), v.codes.end());
    if (v.codes.empty()) throw DataError(where + ": empty visit (" + v.visit_id + ")");
    ds.visits.push_back(std::move(v));
  }
  if (ds.visits.empty()) throw DataError("records file has no visits: " + records_path);
  ds.task = arity == 25 ? TaskKind::multilabel25 : TaskKind::binary;

  ds.rebuild_indexes();

  if (notes_path) {
    std::unordered_map<std::string, bool> seen;
    lineno = 0;
    for (const std::string& line : read_lines(*notes_path)) {
      ++lineno;
      if (line.empty()) continue;
      std::string where = "notes row " + std::to_string(lineno);
      auto fields = split_on(line, '\t');
      if (fields.size() != 2) throw DataError(where + ": want 2 tab-separated fields");
      auto it = ds.visit_index.find(fields[0]);
      if (it == ds.visit_index.end()) throw DataError(where + ": note for unknown visit_id " + fields[0]);
      if (!seen.emplace(fields[0], true).second) throw DataError(where + ": duplicate note for " + fields[0]);
      ds.visits[it->second].note_text = unescape_note_text(fields[1]);
    }
  }

  return ds;
}

void save_dataset(const Dataset& ds, const std::string& records_path, const std::string& codes_path,
                  const std::string& notes_path) {
  {
    std::ofstream out(codes_path, std::ios::binary);
    if (!out) throw DataError("cannot write " + codes_path);
    for (const auto& c : ds.codes) out << c.code_id << '\t' << c.system << '\t' << c.concept_name << '\n';
  }
  {
    std::ofstream out(records_path, std::ios::binary);
    if (!out) throw DataError("cannot write " + records_path);
    for (const auto& v : ds.visits) {
      out << v.visit_id << '\t' << format_label(v.label) << '\t';
      for (size_t i = 0; i < v.codes.size(); ++i) out << (i ? "," : "") << v.codes[i];
      out << '\n';
    }
  }
  {
    std::ofstream out(notes_path, std::ios::binary);
    if (!out) throw DataError("cannot write " + notes_path);
    for (const auto& v : ds.visits)
      if (!v.note_text.empty()) out << v.visit_id << '\t' << escape_note_text(v.note_text) << '\n';
  }
}

Dataset split_dataset(const Dataset& ds, uint64_t seed, bool stratified) {
  size_t total = ds.visits.size();
  if (total < 10) throw DataError("need at least 10 visits to split, have " + std::to_string(total));

  Dataset out = ds;
  out.splits.clear();

  auto assign = [&](const std::vector<int>& order) {
    size_t p = order.size();
    size_t n_val = p / 10;
    size_t n_test = p / 5;
    size_t n_train = p - n_val - n_test;
    for (size_t i = 0; i < p; ++i) {
      SplitTag tag = i < n_train ? SplitTag::train : (i < n_train + n_val ? SplitTag::val : SplitTag::test);
      out.splits[ds.visits[order[i]].visit_id] = tag;
    }
  };

  std::mt19937_64 g(seed);
  if (!stratified) {
    std::vector<int> order(total);
    for (size_t i = 0; i < total; ++i) order[i] = static_cast<int>(i);
    deterministic_shuffle(order, g);
    assign(order);
  } else {
    std::vector<int> pos, neg;
    for (size_t i = 0; i < total; ++i)
      (ds.visits[i].label[0] ? pos : neg).push_back(static_cast<int>(i));
    deterministic_shuffle(pos, g);
    deterministic_shuffle(neg, g);
    assign(pos);
    assign(neg);
  }
  return out;
}

std::string textualize_visit(const VisitRecord& v, const Dataset& registry) {
  std::vector<std::pair<int, const std::string*>> ordered;
  ordered.reserve(v.codes.size());
  for (const std::string& cid : v.codes) {
    auto it = registry.code_index.find(cid);
    if (it == registry.code_index.end()) throw DataError("unknown code_id in visit " + v.visit_id + ": " + cid);
    ordered.emplace_back(it->second, &registry.codes[it->second].concept_name);
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::string text = "Patient visit with: ";
  for (size_t i = 0; i < ordered.size(); ++i) {
    if (i) text += "; ";
    text += *ordered[i].second;
  }
  return text;
}

std::string filter_note_sections(const std::string& note, const std::vector<std::string>& blocked_sections) {
  if (note.empty()) return note;
  std::vector<std::string> blocked;
  blocked.reserve(blocked_sections.size());
  for (const auto& b : blocked_sections) blocked.push_back(lower(trim(b)));

  std::string out;
  out.reserve(note.size());
  bool skipping = false;
  size_t pos = 0;
  while (pos < note.size()) {
    size_t nl = note.find('\n', pos);
    size_t end = nl == std::string::npos ? note.size() : nl + 1;
    std::string line = note.substr(pos, (nl == std::string::npos ? note.size() : nl) - pos);
    if (auto name = header_name(line)) {
      std::string key = lower(*name);
      skipping = std::find(blocked.begin(), blocked.end(), key) != blocked.end();
    }
    if (!skipping) out.append(note, pos, end - pos);
    pos = end;
  }
  return out;
}

SignalSpec SignalSpec::parse(const std::string& name) {
  std::string n = lower(trim(name));
  if (n == "structure-only" || n == "structure_only" || n == "structure") return structure_only();
  if (n == "semantics-only" || n == "semantics_only" || n == "semantics") return semantics_only();
  if (n == "mixed") return mixed();
  throw DataError("unknown signal spec: " + name + " (want structure-only | semantics-only | mixed)");
}

namespace {

const char* kConditions[] = {
    "essential hypertension", "type 2 diabetes mellitus", "chronic kidney disease stage 3",
    "congestive heart failure", "atrial fibrillation", "chronic obstructive pulmonary disease",
    "community acquired pneumonia", "acute kidney injury", "iron deficiency anemia",
    "major depressive disorder", "generalized anxiety disorder", "mixed hyperlipidemia",
    "acquired hypothyroidism", "obstructive sleep apnea", "gastroesophageal reflux disease",
    "osteoarthritis of knee", "chronic low back pain", "urinary tract infection",
    "cellulitis of lower limb", "sepsis unspecified organism", "acute pancreatitis",
    "cholelithiasis with cholecystitis", "diverticulitis of colon", "peptic ulcer disease",
    "asthma with exacerbation", "pulmonary embolism", "deep venous thrombosis",
    "cerebral infarction", "transient ischemic attack", "seizure disorder",
    "migraine without aura", "parkinson disease", "rheumatoid arthritis", "systemic lupus erythematosus",
    "psoriasis vulgaris", "chronic hepatitis c", "alcoholic cirrhosis of liver", "morbid obesity",
    "protein calorie malnutrition", "pressure ulcer of sacral region", "delirium superimposed on dementia",
    "chronic osteomyelitis", "gout of right foot", "diabetic peripheral neuropathy"};

const char* kMedications[] = {
    "metformin hydrochloride", "lisinopril", "atorvastatin calcium", "amlodipine besylate",
    "levothyroxine sodium", "omeprazole", "albuterol sulfate inhaler", "insulin glargine",
    "furosemide", "warfarin sodium", "gabapentin", "sertraline hydrochloride", "prednisone",
    "azithromycin", "ceftriaxone sodium", "vancomycin hydrochloride", "heparin sodium",
    "apixaban", "clopidogrel bisulfate", "metoprolol tartrate", "hydrochlorothiazide",
    "pantoprazole sodium", "ondansetron", "acetaminophen", "oxycodone hydrochloride",
    "tamsulosin hydrochloride", "spironolactone", "digoxin", "amiodarone hydrochloride",
    "piperacillin tazobactam"};

const char* kProcedures[] = {
    "transthoracic echocardiogram", "chest radiograph two views", "complete blood count",
    "basic metabolic panel", "electrocardiogram twelve lead", "screening colonoscopy",
    "magnetic resonance imaging of brain", "computed tomography of chest with contrast",
    "hemodialysis session", "physical therapy evaluation", "central venous catheter placement",
    "mechanical ventilation less than 96 hours", "percutaneous endoscopic gastrostomy",
    "upper gastrointestinal endoscopy", "incision and drainage of abscess",
    "total knee arthroplasty", "coronary artery bypass graft", "cardiac catheterization",
    "thoracentesis", "lumbar puncture", "blood transfusion packed cells", "wound debridement"};

const char* kQualifiers[] = {"",          "chronic",           "recurrent",          "unspecified",
                             "with complication", "in remission", "initial encounter", "subsequent encounter"};

const char* kSuffixTokens[] = {"alpha", "beta",  "gamma", "delta", "epsilon", "zeta",  "eta",
                               "theta", "iota",  "kappa", "lambda", "mu",     "nu",    "xi",
                               "omicron", "rho", "sigma", "tau",   "upsilon", "phi",   "chi",
                               "psi",   "omega"};

const char* kFillers[] = {
    "Patient resting comfortably on room air.",
    "Vital signs stable throughout the shift.",
    "Diet advanced as tolerated without nausea.",
    "Ambulating in hallway with minimal assistance.",
    "Pain well controlled with current regimen.",
    "Morning laboratory values reviewed with the team.",
    "Family meeting held to discuss goals of care.",
    "No events overnight per nursing report.",
    "Telemetry monitoring continued without alarms.",
    "Wound care performed per protocol.",
    "Discharge planning discussion initiated with case management.",
    "Follow up appointment arranged with primary care provider.",
    "Home medications reconciled on admission.",
    "Intravenous fluids discontinued this morning.",
    "Physical therapy consulted for mobility assessment.",
    "Repeat imaging deferred pending clinical course.",
    "Social work engaged for disposition support.",
    "Patient verbalized understanding of the treatment plan.",
    "Foley catheter removed and voiding spontaneously.",
    "Blood cultures remain negative to date."};

const char* kServices[] = {"MEDICINE", "SURGERY", "CARDIOLOGY", "NEUROLOGY", "ORTHOPEDICS"};

constexpr const char* kTriggerSentence =
    "Overnight the patient experienced acute decompensation requiring escalation of care.";
constexpr const char* kTriggerPhrase = "acute decompensation requiring escalation";

constexpr const char* kPairNameA = "acute coronary syndrome";
constexpr const char* kPairNameB = "elevated troponin level";
constexpr const char* kMarkerStem = "restrictive cardiomyopathy phenotype";
constexpr const char* kDecoyStem = "benign cutaneous nevus pattern";

std::string family_name(const char* stem, int i) {
  constexpr int n_tok = static_cast<int>(sizeof(kSuffixTokens) / sizeof(kSuffixTokens[0]));
  std::string name = std::string(stem) + " " + kSuffixTokens[i % n_tok];
  if (i >= n_tok) name += " series " + std::to_string(i / n_tok + 1);
  return name;
}

std::string code_id_for(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "C%04d", i);
  return buf;
}

}  // namespace

Dataset generate_synthetic_dataset(int n_visits, int n_codes, TaskKind task, const SignalSpec& spec,
                                   uint64_t seed, SyntheticInfo* info) {
  if (n_visits < 20 || n_codes < 10)
    throw DataError("synthetic generator needs n_visits >= 20 and n_codes >= 10");
  double w_total = spec.w_structure + spec.w_concept + spec.w_note;
  if (w_total <= 0.0) throw DataError("signal spec has no active channel");
  if (spec.positive_rate <= 0.0 || spec.positive_rate >= 1.0)
    throw DataError("positive_rate must lie in (0,1)");
  double w_struct = spec.w_structure / w_total;
  double w_concept = spec.w_concept / w_total;

  bool use_struct = spec.w_structure > 0.0;
  bool use_concept = spec.w_concept > 0.0;

  int n_pair = use_struct ? 2 : 0;
  int remaining = n_codes - n_pair;
  int fam = 0;
  if (use_concept) {
    fam = std::min(remaining * 3 / 10, 60);
    fam = std::min(fam, (remaining - 6) / 2);
    if (fam < 2) throw DataError("n_codes too small for the concept channel");
  }
  int n_cluster_codes = remaining - 2 * fam;
  int n_clusters = std::clamp(n_cluster_codes / 6, 1, 8);

  Dataset ds;
  ds.task = task;
  SyntheticInfo local;

  int next_id = 0;
  if (use_struct) {
    ds.codes.push_back({code_id_for(next_id++), "icd10", kPairNameA});
    ds.codes.push_back({code_id_for(next_id++), "icd10", kPairNameB});
    local.structure_pair = {ds.codes[0].code_id, ds.codes[1].code_id};
  }
  for (int i = 0; i < fam; ++i) {
    ds.codes.push_back({code_id_for(next_id++), "icd10", family_name(kMarkerStem, i)});
    local.marker_codes.push_back(ds.codes.back().code_id);
  }
  for (int i = 0; i < fam; ++i) {
    ds.codes.push_back({code_id_for(next_id++), "icd10", family_name(kDecoyStem, i)});
    local.decoy_codes.push_back(ds.codes.back().code_id);
  }

  // Cluster codes draw names from the pooled vocabularies, with qualifiers for
  // uniqueness once the base pools run out.
  struct NamePool {
    const char** names;
    int n;
    const char* system;
  };
  NamePool pools[] = {{kConditions, static_cast<int>(sizeof(kConditions) / sizeof(char*)), "icd10"},
                      {kMedications, static_cast<int>(sizeof(kMedications) / sizeof(char*)), "rxnorm"},
                      {kProcedures, static_cast<int>(sizeof(kProcedures) / sizeof(char*)), "cpt"}};
  int base_total = pools[0].n + pools[1].n + pools[2].n;
  std::vector<std::vector<int>> clusters(n_clusters);
  for (int i = 0; i < n_cluster_codes; ++i) {
    int round = i / base_total;
    int k = i % base_total;
    NamePool* p = &pools[0];
    if (k >= pools[0].n + pools[1].n) {
      p = &pools[2];
      k -= pools[0].n + pools[1].n;
    } else if (k >= pools[0].n) {
      p = &pools[1];
      k -= pools[0].n;
    }
    std::string name = p->names[k];
    int nq = static_cast<int>(sizeof(kQualifiers) / sizeof(char*));
    if (round > 0 && round < nq)
      name += std::string(" ") + kQualifiers[round];
    else if (round >= nq)
      name += " series " + std::to_string(round);
    ds.codes.push_back({code_id_for(next_id), p->system, name});
    clusters[i % n_clusters].push_back(next_id);
    ++next_id;
  }

  local.trigger_phrase = kTriggerPhrase;

  std::unordered_map<std::string, int> cluster_of;
  for (int c = 0; c < n_clusters; ++c)
    for (int idx : clusters[c]) cluster_of[ds.codes[idx].code_id] = c;

  int n_fillers = static_cast<int>(sizeof(kFillers) / sizeof(char*));
  int n_services = static_cast<int>(sizeof(kServices) / sizeof(char*));

  for (int v = 0; v < n_visits; ++v) {
    std::mt19937_64 g(mix64(seed, 1000 + static_cast<uint64_t>(v)));
    VisitRecord rec;
    rec.visit_id = "V" + std::to_string(100000 + v);

    double r = u01(g);
    int channel = r < w_struct ? 0 : (r < w_struct + w_concept ? 1 : 2);
    bool y = u01(g) < spec.positive_rate;

    int k = static_cast<int>(g() % n_clusters);
    int k_minor = static_cast<int>(g() % n_clusters);
    const auto& pool = clusters[k];
    int n_base = 4 + static_cast<int>(g() % 3);
    n_base = std::min<int>(n_base, static_cast<int>(pool.size()));

    std::vector<int> pick = pool;
    for (int i = 0; i < n_base; ++i) {
      size_t j = i + g() % (pick.size() - i);
      std::swap(pick[i], pick[j]);
      rec.codes.push_back(ds.codes[pick[i]].code_id);
    }
    int n_minor = static_cast<int>(g() % 3);
    const auto& mpool = clusters[k_minor];
    for (int i = 0; i < n_minor && i < static_cast<int>(mpool.size()); ++i) {
      size_t j = g() % mpool.size();
      rec.codes.push_back(ds.codes[mpool[j]].code_id);
    }

    bool trigger = false;
    if (channel == 0 && use_struct) {
      if (y) {
        rec.codes.push_back(local.structure_pair[0]);
        rec.codes.push_back(local.structure_pair[1]);
      } else {
        // Size-balanced negatives: at most one pair code, padded with unused
        // cluster codes so visit size carries no label signal.
        bool one = u01(g) < 0.4;
        if (one) rec.codes.push_back(local.structure_pair[g() % 2]);
        int pad = one ? 1 : 2;
        for (int i = 0; i < pad && n_base + i < static_cast<int>(pick.size()); ++i)
          rec.codes.push_back(ds.codes[pick[n_base + i]].code_id);
      }
    } else if (channel == 1 && use_concept) {
      const auto& family = y ? local.marker_codes : local.decoy_codes;
      rec.codes.push_back(family[g() % family.size()]);
    } else {
      trigger = y;
    }

    std::sort(rec.codes.begin(), rec.codes.end());
    rec.codes.erase(std::unique(rec.codes.begin(), rec.codes.end()), rec.codes.end());

    std::ostringstream note;
    note << "Admission Date: 2" << 150 + g() % 50 << "-" << 1 + g() % 12 << "-" << 1 + g() % 28 << "\n";
    note << "Service: " << kServices[g() % n_services] << "\n";
    note << "History: " << kFillers[g() % n_fillers] << " " << kFillers[g() % n_fillers];
    if (trigger) note << " " << kTriggerSentence;
    note << "\n";
    note << "Plan: " << kFillers[g() % n_fillers];
    rec.note_text = note.str();

    if (task == TaskKind::binary) {
      rec.label = {static_cast<uint8_t>(y ? 1 : 0)};
    } else {
      rec.label.assign(25, 0);
      rec.label[0] = y ? 1 : 0;
      std::vector<int> counts(n_clusters, 0);
      for (const std::string& cid : rec.codes) {
        auto it = cluster_of.find(cid);
        if (it != cluster_of.end()) ++counts[it->second];
      }
      static const int kBandThreshold[3] = {1, 2, 4};
      for (int j = 1; j < 25; ++j) {
        int c = (j - 1) % n_clusters;
        int band = ((j - 1) / n_clusters) % 3;
        rec.label[j] = counts[c] >= kBandThreshold[band] ? 1 : 0;
      }
    }

    ds.visits.push_back(std::move(rec));
  }

  ds.rebuild_indexes();
  if (info) *info = local;
  return ds;
}

std::string escape_note_text(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\\': out += "\\\\"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string unescape_note_text(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      char n = s[i + 1];
      if (n == 'n') {
        out.push_back('\n');
        ++i;
        continue;
      }
      if (n == 't') {
        out.push_back('\t');
        ++i;
        continue;
      }
      if (n == '\\') {
        out.push_back('\\');
        ++i;
        continue;
      }
    }
    out.push_back(s[i]);
  }
  return out;
}

}  // namespace mingle
