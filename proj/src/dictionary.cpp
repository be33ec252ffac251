#include "lsdat/dictionary.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "lsdat/errors.hpp"

namespace lsdat {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json entry_to_json(const DictionaryEntry& e) {
  ordered_json j;
  j["sample_id"] = e.sample_id;
  j["label"] = e.label;
  j["score"] = e.score;
  j["first_used"] = e.first_used;
  j["last_used"] = e.last_used;
  return j;
}

DictionaryEntry entry_from_json(const nlohmann::json& j, const std::string& where) {
  DictionaryEntry e;
  for (const char* field : {"sample_id", "label", "score", "last_used"}) {
    if (!j.contains(field)) {
      throw IoError("dictionary file: " + where + " is missing \"" + field + "\"");
    }
  }
  try {
    e.sample_id = j.at("sample_id").get<std::string>();
    e.label = j.at("label").get<Label>();
    e.score = j.at("score").get<std::uint64_t>();
    e.last_used = j.at("last_used").get<std::uint64_t>();
    e.first_used = j.value("first_used", e.last_used);
  } catch (const nlohmann::json::exception& ex) {
    throw IoError("dictionary file: " + where + " has a mistyped field: " + ex.what());
  }
  return e;
}

void sort_tier(std::vector<DictionaryEntry>& tier) {
  std::stable_sort(tier.begin(), tier.end(), entry_outranks);
}

}  // namespace

bool operator==(const DictionaryEntry& a, const DictionaryEntry& b) {
  return a.sample_id == b.sample_id && a.label == b.label && a.score == b.score &&
         a.first_used == b.first_used && a.last_used == b.last_used;
}

bool entry_outranks(const DictionaryEntry& a, const DictionaryEntry& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.last_used != b.last_used) return a.last_used > b.last_used;
  return a.sample_id < b.sample_id;
}

bool operator==(const CandidateRef& a, const CandidateRef& b) {
  return a.sample_id == b.sample_id && a.label == b.label;
}

HierarchicalDictionary::HierarchicalDictionary(std::uint64_t rng_seed, std::size_t max_size)
    : rng_seed_(rng_seed), max_size_(max_size) {}

std::vector<CandidateRef> HierarchicalDictionary::next_candidates(Label r, int budget,
                                                                  SamplePool& pool) const {
  if (budget < 1) {
    throw ConfigError("candidate budget must be at least 1");
  }
  std::vector<CandidateRef> out;
  std::unordered_set<std::string> used;
  const auto take = [&](const DictionaryEntry& e) {
    if (e.label == r || used.contains(e.sample_id) ||
        out.size() >= static_cast<std::size_t>(budget)) {
      return;
    }
    used.insert(e.sample_id);
    out.push_back({e.sample_id, e.label});
  };

  if (const auto it = classes_.find(r); it != classes_.end()) {
    for (const DictionaryEntry& e : it->second) {
      take(e);
    }
  }
  for (const DictionaryEntry& e : global_) {
    take(e);
  }
  while (out.size() < static_cast<std::size_t>(budget)) {
    const std::optional<CandidateRef> drawn = pool.draw(r, used);
    if (!drawn) {
      break;
    }
    if (drawn->label == r || used.contains(drawn->sample_id)) {
      throw ConfigError("sample pool returned an invalid candidate: " + drawn->sample_id);
    }
    used.insert(drawn->sample_id);
    out.push_back(*drawn);
  }
  return out;
}

void HierarchicalDictionary::bump(std::vector<DictionaryEntry>& tier,
                                  const std::string& sample_id, Label label,
                                  std::uint64_t tick) {
  const auto it = std::find_if(tier.begin(), tier.end(), [&](const DictionaryEntry& e) {
    return e.sample_id == sample_id;
  });
  if (it != tier.end()) {
    it->score += 1;
    it->last_used = tick;
  } else {
    tier.push_back({sample_id, label, 1, tick, tick});
  }
  sort_tier(tier);
}

void HierarchicalDictionary::record_success(const std::string& sample_id, Label sample_label,
                                            Label target_class) {
  if (sample_label == target_class) {
    throw ConfigError("a sample cannot score against its own class");
  }
  const std::uint64_t tick = next_tick_++;
  bump(classes_[target_class], sample_id, sample_label, tick);
  bump(global_, sample_id, sample_label, tick);

  if (max_size_ > 0 && global_.size() > max_size_) {
    const std::string evicted = global_.back().sample_id;
    global_.pop_back();
    for (auto& [cls, tier] : classes_) {
      std::erase_if(tier, [&](const DictionaryEntry& e) { return e.sample_id == evicted; });
    }
  }
}

std::vector<DictionaryEntry> HierarchicalDictionary::top_global(std::size_t n) const {
  const std::size_t take = std::min(n, global_.size());
  return {global_.begin(), global_.begin() + static_cast<std::ptrdiff_t>(take)};
}

std::vector<DictionaryEntry> HierarchicalDictionary::top_class(Label r, std::size_t n) const {
  const auto it = classes_.find(r);
  if (it == classes_.end()) {
    return {};
  }
  const std::size_t take = std::min(n, it->second.size());
  return {it->second.begin(), it->second.begin() + static_cast<std::ptrdiff_t>(take)};
}

void HierarchicalDictionary::check_invariants() const {
  const auto check_tier = [](const std::vector<DictionaryEntry>& tier, const std::string& name) {
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < tier.size(); ++i) {
      const DictionaryEntry& e = tier[i];
      if (e.score < 1) {
        throw ConfigError("dictionary " + name + ": entry " + e.sample_id + " has score 0");
      }
      if (e.last_used < e.first_used) {
        throw ConfigError("dictionary " + name + ": entry " + e.sample_id +
                          " used before it first appeared");
      }
      if (!seen.insert(e.sample_id).second) {
        throw ConfigError("dictionary " + name + ": duplicate entry " + e.sample_id);
      }
      if (i > 0 && entry_outranks(e, tier[i - 1])) {
        throw ConfigError("dictionary " + name + ": entries out of rank order at " +
                          e.sample_id);
      }
    }
  };

  check_tier(global_, "global");
  for (const auto& [cls, tier] : classes_) {
    check_tier(tier, "class " + std::to_string(cls));
    for (const DictionaryEntry& e : tier) {
      if (e.label == cls) {
        throw ConfigError("dictionary class " + std::to_string(cls) + ": entry " +
                          e.sample_id + " has the class's own label");
      }
      const auto g = std::find_if(global_.begin(), global_.end(), [&](const DictionaryEntry& ge) {
        return ge.sample_id == e.sample_id;
      });
      if (g == global_.end()) {
        throw ConfigError("dictionary class " + std::to_string(cls) + ": entry " +
                          e.sample_id + " is missing from the global tier");
      }
      if (g->score < e.score) {
        throw ConfigError("dictionary global score for " + e.sample_id +
                          " is below its class score");
      }
      if (g->label != e.label) {
        throw ConfigError("dictionary label mismatch for " + e.sample_id);
      }
    }
  }
}

void HierarchicalDictionary::save(const std::filesystem::path& path) const {
  ordered_json doc;
  doc["version"] = 1;
  ordered_json global = ordered_json::array();
  for (const DictionaryEntry& e : global_) {
    global.push_back(entry_to_json(e));
  }
  doc["global"] = std::move(global);
  ordered_json classes = ordered_json::object();
  for (const auto& [cls, tier] : classes_) {
    ordered_json list = ordered_json::array();
    for (const DictionaryEntry& e : tier) {
      list.push_back(entry_to_json(e));
    }
    classes[std::to_string(cls)] = std::move(list);
  }
  doc["classes"] = std::move(classes);

  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open dictionary file for writing: " + path.string());
  }
  out << doc.dump(2) << '\n';
  if (!out) {
    throw IoError("failed writing dictionary file: " + path.string());
  }
}

HierarchicalDictionary HierarchicalDictionary::load(const std::filesystem::path& path,
                                                    std::uint64_t rng_seed,
                                                    std::size_t max_size) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open dictionary file: " + path.string());
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed dictionary file " + path.string() + ": " + e.what());
  }
  if (!doc.contains("global") || !doc["global"].is_array()) {
    throw IoError("dictionary file " + path.string() + " is missing the \"global\" array");
  }
  if (!doc.contains("classes") || !doc["classes"].is_object()) {
    throw IoError("dictionary file " + path.string() + " is missing the \"classes\" object");
  }

  HierarchicalDictionary dict(rng_seed, max_size);
  std::uint64_t max_tick = 0;
  std::size_t idx = 0;
  for (const auto& item : doc["global"]) {
    DictionaryEntry e = entry_from_json(item, "global entry " + std::to_string(idx++));
    max_tick = std::max(max_tick, e.last_used);
    dict.global_.push_back(std::move(e));
  }
  for (const auto& [key, list] : doc["classes"].items()) {
    Label cls = 0;
    try {
      cls = std::stoi(key);
    } catch (const std::exception&) {
      throw IoError("dictionary file: class key \"" + key + "\" is not a label");
    }
    if (!list.is_array()) {
      throw IoError("dictionary file: class \"" + key + "\" is not an array");
    }
    idx = 0;
    for (const auto& item : list) {
      DictionaryEntry e =
          entry_from_json(item, "class " + key + " entry " + std::to_string(idx++));
      max_tick = std::max(max_tick, e.last_used);
      dict.classes_[cls].push_back(std::move(e));
    }
  }

  sort_tier(dict.global_);
  for (auto& [cls, tier] : dict.classes_) {
    sort_tier(tier);
  }
  dict.next_tick_ = max_tick + 1;
  try {
    dict.check_invariants();
  } catch (const ConfigError& e) {
    throw IoError("dictionary file " + path.string() + " is inconsistent: " + e.what());
  }
  return dict;
}

bool operator==(const HierarchicalDictionary& a, const HierarchicalDictionary& b) {
  return a.global_ == b.global_ && a.classes_ == b.classes_;
}

}  // namespace lsdat
