#pragma once

#include <cstdint>
#include <random>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lsdat/attack.hpp"
#include "lsdat/constraints.hpp"
#include "lsdat/dictionary.hpp"
#include "lsdat/image.hpp"
#include "lsdat/oracle.hpp"
#include "lsdat/rpca.hpp"

namespace lsdat {

struct DatasetSample {
  std::string sample_id;
  Label label = 0;
  ImageTensor image{1, 1, 1};
};

struct Dataset {
  std::vector<DatasetSample> samples;
  int class_count = 0;

  const DatasetSample* find(const std::string& sample_id) const;
};

/// Manifest JSON: {version, class_count, images: [{sample_id, path,
/// label}]}. Paths resolve relative to the manifest's directory. Every
/// image is decoded and validated eagerly.
Dataset load_dataset(const std::filesystem::path& manifest_path);

/// Builds an oracle from a descriptor "kind:argument" where kind is
/// linear, centroid, remote or replay. File-backed oracles must agree
/// with expected_class_count.
std::unique_ptr<Oracle> make_oracle(const std::string& descriptor, int expected_class_count);

/// Loads a linear or centroid oracle definition file (JSON, dispatched
/// on its "kind" field).
std::unique_ptr<Oracle> load_oracle_file(const std::filesystem::path& path,
                                         int expected_class_count);

enum class DictionaryMode { Random, Dictionary };

std::string to_string(DictionaryMode mode);
DictionaryMode dictionary_mode_from_string(const std::string& s);

struct CampaignConfig {
  std::string oracle_descriptor;  // informational, echoed in reports
  PerturbationConstraint constraint = LinfBudget{0.1};
  double alpha = 0.05;
  int max_iter = 20;
  int explore = 100;  // G
  DictionaryMode mode = DictionaryMode::Random;
  std::filesystem::path dictionary_path;  // required in mode D
  std::uint64_t seed = 0;
  int jobs = 1;  // worker threads over target images; 1 = sequential
  bool verify_clean = false;
  bool strict_errors = false;  // abort on the first oracle hard error
  bool clip_pixels = true;
  RpcaConfig rpca;

  void validate() const;
};

struct ReportRow {
  std::string sample_id;
  bool success = false;
  std::uint64_t queries = 0;
  int j = 0;  // fully exhausted candidates before success/giving up
  std::optional<PerturbationNorms> norms;           // vs reconstruction
  std::optional<PerturbationNorms> norms_vs_input;  // vs raw input
  std::string initial_sample_id;  // empty unless successful
  bool lsd_warning = false;
  std::string error;  // empty when the oracle behaved
};

bool operator==(const ReportRow& a, const ReportRow& b);

struct NormStats {
  double mean = 0.0;
  double max = 0.0;
};

bool operator==(const NormStats& a, const NormStats& b);

struct DictionaryStatsRow {
  std::string sample_id;
  std::uint64_t successes = 0;
  double mean_queries = 0.0;
  double share = 0.0;  // fraction of all successes won by this entry
};

bool operator==(const DictionaryStatsRow& a, const DictionaryStatsRow& b);

struct CampaignReport {
  std::string oracle;  // descriptor string
  std::string mode;    // "R" | "D"
  std::string norm;    // "l0" | "l2" | "linf"
  double budget = 0.0;
  double alpha = 0.0;
  int max_iter = 0;
  int explore = 0;
  std::uint64_t seed = 0;
  std::uint64_t dataset_size = 0;  // after any verify-clean filtering
  double fooling_rate = 0.0;
  std::optional<double> average_queries;  // over successes; null if none
  std::uint64_t total_queries = 0;        // attack queries only
  std::uint64_t clean_queries = 0;        // verify-clean queries, tallied apart
  std::vector<std::string> clean_removed;
  std::optional<NormStats> l0_stats, l2_stats, linf_stats;  // over successes
  std::vector<DictionaryStatsRow> dictionary_top;  // empty in mode R
  std::vector<ReportRow> rows;
};

bool operator==(const CampaignReport& a, const CampaignReport& b);

/// Runs the full attack campaign: per image, builds the candidate list
/// (mode R: seeded random draws; mode D: dictionary tiers with random
/// fallback), attacks with exploration, and aggregates FR/AQ. Mode D
/// loads the dictionary file when present and saves it afterwards.
CampaignReport run_campaign(const CampaignConfig& cfg, const Dataset& data, Oracle& oracle);

/// Same, but reusing a caller-owned decomposition cache across
/// campaigns over the same images. The cache config must match cfg.rpca.
CampaignReport run_campaign(const CampaignConfig& cfg, const Dataset& data, Oracle& oracle,
                            LsdCache& cache);

/// Uniform random draws from a dataset, without replacement, excluding
/// a given label. Deterministic for a fixed seed.
class DatasetPool : public SamplePool {
 public:
  DatasetPool(const Dataset& data, std::uint64_t seed);
  std::optional<CandidateRef> draw(Label exclude_label,
                                   const std::unordered_set<std::string>& used) override;

 private:
  const Dataset& data_;
  std::mt19937_64 rng_;
};

struct SweepRate {
  double rate_percent = 0.0;
  std::size_t k = 0;
  CampaignReport report;
};

struct SweepReport {
  std::vector<SweepRate> rates;      // ascending rate order
  bool fr_non_decreasing = false;    // trend flag, reported not asserted
};

bool operator==(const SweepRate& a, const SweepRate& b);
bool operator==(const SweepReport& a, const SweepReport& b);

/// One campaign per perturbation rate P% with an l0 budget of
/// k = max(1, round(P/100 * coordinate count)). Requires a uniform
/// image shape across the dataset.
SweepReport sweep_l0(const CampaignConfig& cfg, const Dataset& data, Oracle& oracle,
                     std::vector<double> rates_percent);

enum class ReportFormat { Csv, Json };

ReportFormat report_format_from_string(const std::string& s);

void emit_report(const CampaignReport& report, ReportFormat format,
                 const std::filesystem::path& path);
CampaignReport load_report_json(const std::filesystem::path& path);

void emit_sweep(const SweepReport& report, ReportFormat format,
                const std::filesystem::path& path);

/// Per-entry success counts, mean queries and success share, from a
/// mode-D report's rows; empty for mode R.
std::vector<DictionaryStatsRow> dictionary_stats(const CampaignReport& report);

}  // namespace lsdat
