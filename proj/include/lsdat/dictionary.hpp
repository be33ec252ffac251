#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "lsdat/oracle.hpp"

namespace lsdat {

struct DictionaryEntry {
  std::string sample_id;
  Label label = 0;
  std::uint64_t score = 0;       // successful-attack count
  std::uint64_t first_used = 0;  // update tick of the first success
  std::uint64_t last_used = 0;   // update tick of the latest success
};

bool operator==(const DictionaryEntry& a, const DictionaryEntry& b);

/// Rank order: score desc, then most recent success first, then
/// sample_id asc. Returns true when a outranks b.
bool entry_outranks(const DictionaryEntry& a, const DictionaryEntry& b);

/// A selected initial sample, by reference into the dataset store.
struct CandidateRef {
  std::string sample_id;
  Label label = 0;
};

bool operator==(const CandidateRef& a, const CandidateRef& b);

/// Source of random fallback samples for cold starts. Implementations
/// hold their own seeded RNG so selection is reproducible.
class SamplePool {
 public:
  virtual ~SamplePool() = default;

  /// Draws one sample with label != exclude_label whose id is not in
  /// `used`; nullopt when no such sample remains.
  virtual std::optional<CandidateRef> draw(Label exclude_label,
                                           const std::unordered_set<std::string>& used) = 0;
};

/// Class-specific and global ranked stores of initial adversarial
/// samples, scored by how many attacks each sample has won.
class HierarchicalDictionary {
 public:
  explicit HierarchicalDictionary(std::uint64_t rng_seed = 0, std::size_t max_size = 0);

  /// Selection policy: class dictionary for r in rank order, then
  /// global entries not already listed, then random pool draws -- all
  /// filtered to label != r, deduplicated, truncated to budget.
  std::vector<CandidateRef> next_candidates(Label r, int budget, SamplePool& pool) const;

  /// Credits sample_id with one more successful attack against
  /// target_class, creating entries as needed and reordering both tiers.
  void record_success(const std::string& sample_id, Label sample_label, Label target_class);

  std::vector<DictionaryEntry> top_global(std::size_t n) const;
  std::vector<DictionaryEntry> top_class(Label r, std::size_t n) const;

  std::size_t global_size() const { return global_.size(); }
  std::size_t class_count() const { return classes_.size(); }
  std::uint64_t rng_seed() const { return rng_seed_; }
  std::size_t max_size() const { return max_size_; }

  /// Throws ConfigError when an ordering or membership invariant is
  /// broken; used by tests and after load.
  void check_invariants() const;

  void save(const std::filesystem::path& path) const;
  static HierarchicalDictionary load(const std::filesystem::path& path,
                                     std::uint64_t rng_seed = 0, std::size_t max_size = 0);

  friend bool operator==(const HierarchicalDictionary& a, const HierarchicalDictionary& b);

 private:
  void bump(std::vector<DictionaryEntry>& tier, const std::string& sample_id, Label label,
            std::uint64_t tick);

  std::vector<DictionaryEntry> global_;               // sorted by entry_outranks
  std::map<Label, std::vector<DictionaryEntry>> classes_;  // each sorted
  std::uint64_t next_tick_ = 1;
  std::uint64_t rng_seed_ = 0;
  std::size_t max_size_ = 0;  // 0 = unlimited
};

}  // namespace lsdat
