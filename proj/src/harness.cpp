#include "lsdat/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "lsdat/errors.hpp"
#include "lsdat/image_io.hpp"
#include "lsdat/log.hpp"

namespace lsdat {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string norm_name(const PerturbationConstraint& c) {
  switch (norm_kind(c)) {
    case NormKind::L0:
      return "l0";
    case NormKind::L2:
      return "l2";
    case NormKind::Linf:
      return "linf";
  }
  return "l2";
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) {
    return field;
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json norms_to_json(const PerturbationNorms& n) {
  return json{{"l0", n.l0}, {"l2", n.l2}, {"linf", n.linf}};
}

PerturbationNorms norms_from_json(const json& j) {
  PerturbationNorms n;
  n.l0 = j.at("l0").get<double>();
  n.l2 = j.at("l2").get<double>();
  n.linf = j.at("linf").get<double>();
  return n;
}

}  // namespace

const DatasetSample* Dataset::find(const std::string& sample_id) const {
  for (const DatasetSample& s : samples) {
    if (s.sample_id == sample_id) {
      return &s;
    }
  }
  return nullptr;
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) {
    throw IoError("cannot open manifest: " + manifest_path.string());
  }
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IoError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }

  Dataset data;
  if (!doc.contains("class_count") || !doc["class_count"].is_number_integer()) {
    throw ConfigError("manifest " + manifest_path.string() + " needs an integer class_count");
  }
  data.class_count = doc["class_count"].get<int>();
  if (data.class_count < 2) {
    throw ConfigError("manifest class_count must be at least 2");
  }
  if (!doc.contains("images") || !doc["images"].is_array()) {
    throw ConfigError("manifest " + manifest_path.string() + " needs an \"images\" array");
  }

  const std::filesystem::path base = manifest_path.parent_path();
  std::unordered_set<std::string> seen;
  for (const auto& item : doc["images"]) {
    DatasetSample sample;
    try {
      sample.sample_id = item.at("sample_id").get<std::string>();
      sample.label = item.at("label").get<Label>();
    } catch (const json::exception& e) {
      throw ConfigError("manifest entry missing sample_id/label: " + std::string(e.what()));
    }
    if (!seen.insert(sample.sample_id).second) {
      throw ConfigError("manifest has a duplicate sample_id: " + sample.sample_id);
    }
    if (sample.label < 0 || sample.label >= data.class_count) {
      throw ConfigError("manifest sample " + sample.sample_id + " has label " +
                        std::to_string(sample.label) + " outside [0, " +
                        std::to_string(data.class_count) + ")");
    }
    std::filesystem::path img_path;
    try {
      img_path = item.at("path").get<std::string>();
    } catch (const json::exception&) {
      throw ConfigError("manifest sample " + sample.sample_id + " has no path");
    }
    if (img_path.is_relative()) {
      img_path = base / img_path;
    }
    sample.image = read_image(img_path);
    try {
      sample.image.validate();
    } catch (const ConfigError& e) {
      throw ConfigError("manifest sample " + sample.sample_id + ": " + e.what());
    }
    data.samples.push_back(std::move(sample));
  }
  return data;
}

std::unique_ptr<Oracle> load_oracle_file(const std::filesystem::path& path,
                                         int expected_class_count) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open oracle file: " + path.string());
  }
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IoError("malformed oracle file " + path.string() + ": " + e.what());
  }

  const std::string kind = doc.value("kind", "");
  int class_count = 0;
  int height = 0, width = 0, channels = 0;
  try {
    class_count = doc.at("class_count").get<int>();
    height = doc.at("height").get<int>();
    width = doc.at("width").get<int>();
    channels = doc.at("channels").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError("oracle file " + path.string() +
                      " needs class_count/height/width/channels: " + e.what());
  }
  if (expected_class_count > 0 && class_count != expected_class_count) {
    throw ConfigError("oracle file " + path.string() + " declares " +
                      std::to_string(class_count) + " classes, manifest expects " +
                      std::to_string(expected_class_count));
  }
  const std::size_t dim =
      static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
      static_cast<std::size_t>(channels);
  if (dim == 0) {
    throw ConfigError("oracle file " + path.string() + " has empty dimensions");
  }

  if (kind == "linear") {
    std::vector<std::vector<double>> weights;
    std::vector<double> biases;
    try {
      weights = doc.at("weights").get<std::vector<std::vector<double>>>();
      biases = doc.at("biases").get<std::vector<double>>();
    } catch (const json::exception& e) {
      throw ConfigError("oracle file " + path.string() + " weights/biases: " + e.what());
    }
    if (weights.size() != static_cast<std::size_t>(class_count)) {
      throw ConfigError("oracle file " + path.string() + ": weight row count " +
                        std::to_string(weights.size()) + " != class_count");
    }
    for (const auto& row : weights) {
      if (row.size() != dim) {
        throw ConfigError("oracle file " + path.string() +
                          ": weight row length does not match height*width*channels");
      }
    }
    return make_linear_oracle(std::move(weights), std::move(biases));
  }
  if (kind == "centroid") {
    std::vector<std::vector<double>> raw;
    try {
      raw = doc.at("centroids").get<std::vector<std::vector<double>>>();
    } catch (const json::exception& e) {
      throw ConfigError("oracle file " + path.string() + " centroids: " + e.what());
    }
    if (raw.size() != static_cast<std::size_t>(class_count)) {
      throw ConfigError("oracle file " + path.string() + ": centroid count " +
                        std::to_string(raw.size()) + " != class_count");
    }
    std::vector<ImageTensor> centroids;
    centroids.reserve(raw.size());
    for (const auto& values : raw) {
      if (values.size() != dim) {
        throw ConfigError("oracle file " + path.string() +
                          ": centroid length does not match height*width*channels");
      }
      ImageTensor img(height, width, channels);
      img.data = values;
      centroids.push_back(std::move(img));
    }
    return make_centroid_oracle(std::move(centroids));
  }
  throw ConfigError("oracle file " + path.string() + " has unknown kind \"" + kind + "\"");
}

std::unique_ptr<Oracle> make_oracle(const std::string& descriptor, int expected_class_count) {
  const auto colon = descriptor.find(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 >= descriptor.size()) {
    throw ConfigError("oracle descriptor must look like kind:argument, got \"" + descriptor +
                      "\"");
  }
  const std::string kind = descriptor.substr(0, colon);
  const std::string arg = descriptor.substr(colon + 1);

  if (kind == "linear" || kind == "centroid") {
    auto oracle = load_oracle_file(arg, expected_class_count);
    // The file's own kind field is authoritative; descriptor must agree.
    const bool is_centroid = dynamic_cast<CentroidOracle*>(oracle.get()) != nullptr;
    if ((kind == "centroid") != is_centroid) {
      throw ConfigError("oracle file " + arg + " does not define a " + kind + " oracle");
    }
    return oracle;
  }
  if (kind == "remote") {
    RemoteConfig cfg;
    cfg.url = arg;
    cfg.class_count = expected_class_count > 0 ? expected_class_count : 2;
    return make_remote_oracle(std::move(cfg));
  }
  if (kind == "replay") {
    auto oracle = load_replay_oracle(arg);
    if (expected_class_count > 0 && oracle->class_count() != expected_class_count) {
      throw ConfigError("replay trace " + arg + " declares " +
                        std::to_string(oracle->class_count()) +
                        " classes, manifest expects " + std::to_string(expected_class_count));
    }
    return oracle;
  }
  throw ConfigError("unknown oracle kind \"" + kind + "\"");
}

std::string to_string(DictionaryMode mode) {
  return mode == DictionaryMode::Dictionary ? "D" : "R";
}

DictionaryMode dictionary_mode_from_string(const std::string& s) {
  if (s == "R") return DictionaryMode::Random;
  if (s == "D") return DictionaryMode::Dictionary;
  throw ConfigError("mode must be R or D, got \"" + s + "\"");
}

void CampaignConfig::validate() const {
  if (!(alpha > 0.0) || alpha > 1.0) {
    throw ConfigError("alpha must lie in (0, 1]");
  }
  if (max_iter < 1) {
    throw ConfigError("max-iter must be at least 1");
  }
  if (explore < 1) {
    throw ConfigError("explore budget must be at least 1");
  }
  if (jobs < 1) {
    throw ConfigError("jobs must be at least 1");
  }
  lsdat::validate(constraint);
  rpca.validate();
  if (mode == DictionaryMode::Dictionary && dictionary_path.empty()) {
    throw ConfigError("mode D requires a dictionary path");
  }
}

bool operator==(const ReportRow& a, const ReportRow& b) {
  return a.sample_id == b.sample_id && a.success == b.success && a.queries == b.queries &&
         a.j == b.j && a.norms == b.norms && a.norms_vs_input == b.norms_vs_input &&
         a.initial_sample_id == b.initial_sample_id && a.lsd_warning == b.lsd_warning &&
         a.error == b.error;
}

bool operator==(const NormStats& a, const NormStats& b) {
  return a.mean == b.mean && a.max == b.max;
}

bool operator==(const DictionaryStatsRow& a, const DictionaryStatsRow& b) {
  return a.sample_id == b.sample_id && a.successes == b.successes &&
         a.mean_queries == b.mean_queries && a.share == b.share;
}

bool operator==(const CampaignReport& a, const CampaignReport& b) {
  return a.oracle == b.oracle && a.mode == b.mode && a.norm == b.norm &&
         a.budget == b.budget && a.alpha == b.alpha && a.max_iter == b.max_iter &&
         a.explore == b.explore && a.seed == b.seed && a.dataset_size == b.dataset_size &&
         a.fooling_rate == b.fooling_rate && a.average_queries == b.average_queries &&
         a.total_queries == b.total_queries && a.clean_queries == b.clean_queries &&
         a.clean_removed == b.clean_removed && a.l0_stats == b.l0_stats &&
         a.l2_stats == b.l2_stats && a.linf_stats == b.linf_stats &&
         a.dictionary_top == b.dictionary_top && a.rows == b.rows;
}

DatasetPool::DatasetPool(const Dataset& data, std::uint64_t seed) : data_(data), rng_(seed) {}

std::optional<CandidateRef> DatasetPool::draw(Label exclude_label,
                                              const std::unordered_set<std::string>& used) {
  std::vector<const DatasetSample*> eligible;
  eligible.reserve(data_.samples.size());
  for (const DatasetSample& s : data_.samples) {
    if (s.label != exclude_label && !used.contains(s.sample_id)) {
      eligible.push_back(&s);
    }
  }
  if (eligible.empty()) {
    return std::nullopt;
  }
  const std::size_t pick = rng_() % eligible.size();
  return CandidateRef{eligible[pick]->sample_id, eligible[pick]->label};
}

namespace {

struct VerifyCleanResult {
  std::vector<std::size_t> kept_indices;
  std::vector<std::string> removed_ids;
  std::uint64_t queries = 0;
};

VerifyCleanResult verify_clean_pass(const Dataset& data, Oracle& oracle) {
  VerifyCleanResult result;
  const std::uint64_t before = oracle.read_counter().total;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const DatasetSample& s = data.samples[i];
    const Label got = oracle.query(s.image);
    if (got == s.label) {
      result.kept_indices.push_back(i);
    } else {
      LSDAT_LOG_INFO("verify-clean drops %s: oracle says %d, manifest says %d",
                     s.sample_id.c_str(), got, s.label);
      result.removed_ids.push_back(s.sample_id);
    }
  }
  result.queries = oracle.read_counter().total - before;
  return result;
}

std::vector<DictionaryStatsRow> stats_from_rows(const std::vector<ReportRow>& rows) {
  struct Accum {
    std::uint64_t successes = 0;
    std::uint64_t queries = 0;
  };
  std::unordered_map<std::string, Accum> by_sample;
  std::uint64_t total_successes = 0;
  for (const ReportRow& row : rows) {
    if (!row.success || row.initial_sample_id.empty()) {
      continue;
    }
    Accum& a = by_sample[row.initial_sample_id];
    a.successes += 1;
    a.queries += row.queries;
    total_successes += 1;
  }
  std::vector<DictionaryStatsRow> out;
  out.reserve(by_sample.size());
  for (const auto& [id, acc] : by_sample) {
    DictionaryStatsRow row;
    row.sample_id = id;
    row.successes = acc.successes;
    row.mean_queries = static_cast<double>(acc.queries) / static_cast<double>(acc.successes);
    row.share = static_cast<double>(acc.successes) / static_cast<double>(total_successes);
    out.push_back(std::move(row));
  }
  std::sort(out.begin(), out.end(), [](const DictionaryStatsRow& a, const DictionaryStatsRow& b) {
    if (a.successes != b.successes) return a.successes > b.successes;
    return a.sample_id < b.sample_id;
  });
  return out;
}

/// Shared state for one campaign run.
struct CampaignContext {
  CampaignContext(const CampaignConfig& cfg_in, const Dataset& data_in, Oracle& oracle_in,
                  const std::vector<std::size_t>& kept_in, LsdCache& cache_in)
      : cfg(cfg_in), data(data_in), oracle(oracle_in), kept(kept_in), cache(cache_in) {}

  const CampaignConfig& cfg;
  const Dataset& data;
  Oracle& oracle;
  const std::vector<std::size_t>& kept;
  LsdCache& cache;
  HierarchicalDictionary* dict = nullptr;  // null in mode R
  std::mutex dict_mu;
  std::unordered_map<std::string, const DatasetSample*> by_id;
};

ReportRow attack_one(CampaignContext& ctx, std::size_t order_index) {
  const DatasetSample& target = ctx.data.samples[ctx.kept[order_index]];

  DatasetPool pool(ctx.data, mix_seed(ctx.cfg.seed, order_index));
  std::vector<CandidateRef> refs;
  {
    // Candidate selection reads (and in mode D later writes) shared
    // dictionary state; serialize it.
    std::lock_guard<std::mutex> lock(ctx.dict_mu);
    if (ctx.dict != nullptr) {
      refs = ctx.dict->next_candidates(target.label, ctx.cfg.explore, pool);
    } else {
      const HierarchicalDictionary empty;
      refs = empty.next_candidates(target.label, ctx.cfg.explore, pool);
    }
  }

  std::vector<Candidate> candidates;
  candidates.reserve(refs.size());
  for (const CandidateRef& ref : refs) {
    const auto it = ctx.by_id.find(ref.sample_id);
    if (it == ctx.by_id.end()) {
      LSDAT_LOG_WARN("dictionary references %s, which is not in this dataset; skipping",
                     ref.sample_id.c_str());
      continue;
    }
    if (it->second->label != ref.label || it->second->label == target.label) {
      LSDAT_LOG_WARN("stale dictionary label for %s; skipping", ref.sample_id.c_str());
      continue;
    }
    candidates.push_back({ref.sample_id, ref.label, &it->second->image});
  }

  AttackParams params;
  params.alpha = ctx.cfg.alpha;
  params.max_iter = ctx.cfg.max_iter;
  params.constraint = ctx.cfg.constraint;
  params.clip_pixels = ctx.cfg.clip_pixels;

  ExplorationSet set(std::move(candidates), ctx.cfg.explore);
  set.validate_for(target.label);
  const AttackOutcome outcome = attack_with_exploration(
      target.image, target.label, set, ctx.cfg.explore, ctx.oracle, params, ctx.cache);

  ReportRow row;
  row.sample_id = target.sample_id;
  row.success = outcome.success;
  row.queries = outcome.queries_used;
  row.j = outcome.unsuccessful_attempts;
  row.lsd_warning = outcome.lsd_warning;
  row.error = outcome.error;
  if (outcome.success) {
    row.norms = outcome.achieved_norms;
    row.norms_vs_input = outcome.norms_vs_input;
    row.initial_sample_id = outcome.initial_sample_id;
  }

  if (outcome.success && ctx.dict != nullptr) {
    const auto it = ctx.by_id.find(outcome.initial_sample_id);
    if (it != ctx.by_id.end()) {
      std::lock_guard<std::mutex> lock(ctx.dict_mu);
      ctx.dict->record_success(outcome.initial_sample_id, it->second->label, target.label);
    }
  }
  return row;
}

}  // namespace

CampaignReport run_campaign(const CampaignConfig& cfg, const Dataset& data, Oracle& oracle) {
  LsdCache cache(cfg.rpca);
  return run_campaign(cfg, data, oracle, cache);
}

CampaignReport run_campaign(const CampaignConfig& cfg, const Dataset& data, Oracle& oracle,
                            LsdCache& cache) {
  cfg.validate();
  if (oracle.class_count() < data.class_count) {
    throw ConfigError("oracle reports " + std::to_string(oracle.class_count()) +
                      " classes but the manifest needs " + std::to_string(data.class_count));
  }
  if (!(cache.config() == cfg.rpca)) {
    throw ConfigError("decomposition cache was built with a different RPCA config");
  }

  CampaignReport report;
  report.oracle = cfg.oracle_descriptor;
  report.mode = to_string(cfg.mode);
  report.norm = norm_name(cfg.constraint);
  report.budget = budget_value(cfg.constraint);
  report.alpha = cfg.alpha;
  report.max_iter = cfg.max_iter;
  report.explore = cfg.explore;
  report.seed = cfg.seed;

  std::vector<std::size_t> kept(data.samples.size());
  for (std::size_t i = 0; i < kept.size(); ++i) kept[i] = i;
  if (cfg.verify_clean) {
    VerifyCleanResult verified = verify_clean_pass(data, oracle);
    kept = std::move(verified.kept_indices);
    report.clean_removed = std::move(verified.removed_ids);
    report.clean_queries = verified.queries;
  }
  report.dataset_size = kept.size();

  HierarchicalDictionary dict(cfg.seed);
  const bool use_dict = cfg.mode == DictionaryMode::Dictionary;
  if (use_dict && std::filesystem::exists(cfg.dictionary_path)) {
    dict = HierarchicalDictionary::load(cfg.dictionary_path, cfg.seed);
  }

  CampaignContext ctx{cfg, data, oracle, kept, cache};
  ctx.dict = use_dict ? &dict : nullptr;
  for (const DatasetSample& s : data.samples) {
    ctx.by_id.emplace(s.sample_id, &s);
  }

  report.rows.resize(kept.size());
  if (cfg.jobs == 1 || kept.size() <= 1) {
    for (std::size_t i = 0; i < kept.size(); ++i) {
      report.rows[i] = attack_one(ctx, i);
      if (cfg.strict_errors && !report.rows[i].error.empty()) {
        throw OracleError("campaign aborted at " + report.rows[i].sample_id + ": " +
                          report.rows[i].error);
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    const int n_workers = std::min<std::size_t>(cfg.jobs, kept.size());
    std::atomic<bool> failed{false};
    std::string first_exception;
    std::mutex exc_mu;
    for (int w = 0; w < n_workers; ++w) {
      workers.emplace_back([&] {
        while (true) {
          const std::size_t i = next.fetch_add(1);
          if (i >= kept.size()) {
            return;
          }
          try {
            report.rows[i] = attack_one(ctx, i);
          } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(exc_mu);
            if (first_exception.empty()) first_exception = e.what();
            failed.store(true);
          }
        }
      });
    }
    for (std::thread& t : workers) {
      t.join();
    }
    if (failed.load()) {
      throw ConfigError("campaign worker failed: " + first_exception);
    }
    if (cfg.strict_errors) {
      for (const ReportRow& row : report.rows) {
        if (!row.error.empty()) {
          throw OracleError("campaign aborted at " + row.sample_id + ": " + row.error);
        }
      }
    }
  }

  std::uint64_t successes = 0;
  std::uint64_t success_queries = 0;
  NormStats l0{}, l2{}, linf{};
  for (const ReportRow& row : report.rows) {
    report.total_queries += row.queries;
    if (!row.success) {
      continue;
    }
    ++successes;
    success_queries += row.queries;
    l0.mean += row.norms->l0;
    l2.mean += row.norms->l2;
    linf.mean += row.norms->linf;
    l0.max = std::max(l0.max, row.norms->l0);
    l2.max = std::max(l2.max, row.norms->l2);
    linf.max = std::max(linf.max, row.norms->linf);
  }
  report.fooling_rate =
      kept.empty() ? 0.0 : static_cast<double>(successes) / static_cast<double>(kept.size());
  if (successes > 0) {
    report.average_queries =
        static_cast<double>(success_queries) / static_cast<double>(successes);
    l0.mean /= static_cast<double>(successes);
    l2.mean /= static_cast<double>(successes);
    linf.mean /= static_cast<double>(successes);
    report.l0_stats = l0;
    report.l2_stats = l2;
    report.linf_stats = linf;
  }
  if (use_dict) {
    report.dictionary_top = stats_from_rows(report.rows);
    dict.save(cfg.dictionary_path);
  }
  return report;
}

SweepReport sweep_l0(const CampaignConfig& cfg, const Dataset& data, Oracle& oracle,
                     std::vector<double> rates_percent) {
  if (rates_percent.empty()) {
    throw ConfigError("sweep-l0 needs at least one rate");
  }
  for (double rate : rates_percent) {
    if (!(rate > 0.0) || rate > 100.0) {
      throw ConfigError("perturbation rates must lie in (0, 100], got " + format_double(rate));
    }
  }
  if (data.samples.empty()) {
    throw ConfigError("sweep-l0 needs a non-empty dataset");
  }
  const ImageTensor& first = data.samples.front().image;
  for (const DatasetSample& s : data.samples) {
    if (!s.image.same_shape(first)) {
      throw ConfigError("sweep-l0 requires a uniform image shape; " + s.sample_id +
                        " differs");
    }
  }
  std::sort(rates_percent.begin(), rates_percent.end());

  const double coords = static_cast<double>(first.size());
  SweepReport sweep;
  sweep.fr_non_decreasing = true;
  LsdCache cache(cfg.rpca);  // decompositions are rate-independent
  for (double rate : rates_percent) {
    SweepRate entry;
    entry.rate_percent = rate;
    entry.k = static_cast<std::size_t>(
        std::max(1.0, std::round(rate / 100.0 * coords)));
    CampaignConfig rate_cfg = cfg;
    rate_cfg.constraint = L0Budget{entry.k};
    entry.report = run_campaign(rate_cfg, data, oracle, cache);
    if (!sweep.rates.empty() &&
        entry.report.fooling_rate < sweep.rates.back().report.fooling_rate) {
      sweep.fr_non_decreasing = false;
    }
    sweep.rates.push_back(std::move(entry));
  }
  return sweep;
}

bool operator==(const SweepRate& a, const SweepRate& b) {
  return a.rate_percent == b.rate_percent && a.k == b.k && a.report == b.report;
}

bool operator==(const SweepReport& a, const SweepReport& b) {
  return a.rates == b.rates && a.fr_non_decreasing == b.fr_non_decreasing;
}

ReportFormat report_format_from_string(const std::string& s) {
  if (s == "csv") return ReportFormat::Csv;
  if (s == "json") return ReportFormat::Json;
  throw ConfigError("format must be csv or json, got \"" + s + "\"");
}

namespace {

ordered_json row_to_json(const ReportRow& row) {
  ordered_json j;
  j["sample_id"] = row.sample_id;
  j["success"] = row.success;
  j["queries"] = row.queries;
  j["j"] = row.j;
  if (row.norms) {
    j["norms"] = norms_to_json(*row.norms);
    j["norms_vs_input"] = norms_to_json(*row.norms_vs_input);
  } else {
    j["norms"] = nullptr;
    j["norms_vs_input"] = nullptr;
  }
  j["initial_sample_id"] =
      row.initial_sample_id.empty() ? ordered_json(nullptr) : ordered_json(row.initial_sample_id);
  j["lsd_warning"] = row.lsd_warning;
  j["error"] = row.error.empty() ? ordered_json(nullptr) : ordered_json(row.error);
  return j;
}

ReportRow row_from_json(const json& j) {
  ReportRow row;
  row.sample_id = j.at("sample_id").get<std::string>();
  row.success = j.at("success").get<bool>();
  row.queries = j.at("queries").get<std::uint64_t>();
  row.j = j.at("j").get<int>();
  if (!j.at("norms").is_null()) {
    row.norms = norms_from_json(j.at("norms"));
    row.norms_vs_input = norms_from_json(j.at("norms_vs_input"));
  }
  if (!j.at("initial_sample_id").is_null()) {
    row.initial_sample_id = j.at("initial_sample_id").get<std::string>();
  }
  row.lsd_warning = j.at("lsd_warning").get<bool>();
  if (!j.at("error").is_null()) {
    row.error = j.at("error").get<std::string>();
  }
  return row;
}

ordered_json stats_to_json(const std::optional<NormStats>& stats) {
  if (!stats) {
    return nullptr;
  }
  ordered_json j;
  j["mean"] = stats->mean;
  j["max"] = stats->max;
  return j;
}

std::optional<NormStats> stats_from_json(const json& j) {
  if (j.is_null()) {
    return std::nullopt;
  }
  NormStats s;
  s.mean = j.at("mean").get<double>();
  s.max = j.at("max").get<double>();
  return s;
}

ordered_json report_to_json(const CampaignReport& report) {
  ordered_json doc;
  doc["version"] = 1;
  doc["oracle"] = report.oracle;
  doc["mode"] = report.mode;
  doc["norm"] = report.norm;
  doc["budget"] = report.budget;
  doc["alpha"] = report.alpha;
  doc["max_iter"] = report.max_iter;
  doc["explore"] = report.explore;
  doc["seed"] = report.seed;
  doc["dataset_size"] = report.dataset_size;
  doc["fooling_rate"] = report.fooling_rate;
  doc["average_queries"] =
      report.average_queries ? ordered_json(*report.average_queries) : ordered_json(nullptr);
  doc["total_queries"] = report.total_queries;
  doc["clean_queries"] = report.clean_queries;
  doc["clean_removed"] = report.clean_removed;
  doc["norm_stats"] = ordered_json{{"l0", stats_to_json(report.l0_stats)},
                                   {"l2", stats_to_json(report.l2_stats)},
                                   {"linf", stats_to_json(report.linf_stats)}};
  ordered_json dict_rows = ordered_json::array();
  for (const DictionaryStatsRow& row : report.dictionary_top) {
    ordered_json item;
    item["sample_id"] = row.sample_id;
    item["successes"] = row.successes;
    item["mean_queries"] = row.mean_queries;
    item["share"] = row.share;
    dict_rows.push_back(std::move(item));
  }
  doc["dictionary_top"] = std::move(dict_rows);
  ordered_json rows = ordered_json::array();
  for (const ReportRow& row : report.rows) {
    rows.push_back(row_to_json(row));
  }
  doc["rows"] = std::move(rows);
  return doc;
}

CampaignReport report_from_json(const json& doc) {
  CampaignReport report;
  report.oracle = doc.at("oracle").get<std::string>();
  report.mode = doc.at("mode").get<std::string>();
  report.norm = doc.at("norm").get<std::string>();
  report.budget = doc.at("budget").get<double>();
  report.alpha = doc.at("alpha").get<double>();
  report.max_iter = doc.at("max_iter").get<int>();
  report.explore = doc.at("explore").get<int>();
  report.seed = doc.at("seed").get<std::uint64_t>();
  report.dataset_size = doc.at("dataset_size").get<std::uint64_t>();
  report.fooling_rate = doc.at("fooling_rate").get<double>();
  if (!doc.at("average_queries").is_null()) {
    report.average_queries = doc.at("average_queries").get<double>();
  }
  report.total_queries = doc.at("total_queries").get<std::uint64_t>();
  report.clean_queries = doc.at("clean_queries").get<std::uint64_t>();
  report.clean_removed = doc.at("clean_removed").get<std::vector<std::string>>();
  const json& stats = doc.at("norm_stats");
  report.l0_stats = stats_from_json(stats.at("l0"));
  report.l2_stats = stats_from_json(stats.at("l2"));
  report.linf_stats = stats_from_json(stats.at("linf"));
  for (const auto& item : doc.at("dictionary_top")) {
    DictionaryStatsRow row;
    row.sample_id = item.at("sample_id").get<std::string>();
    row.successes = item.at("successes").get<std::uint64_t>();
    row.mean_queries = item.at("mean_queries").get<double>();
    row.share = item.at("share").get<double>();
    report.dictionary_top.push_back(std::move(row));
  }
  for (const auto& item : doc.at("rows")) {
    report.rows.push_back(row_from_json(item));
  }
  return report;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open report file for writing: " + path.string());
  }
  out << text;
  if (!out) {
    throw IoError("failed writing report file: " + path.string());
  }
}

std::string report_to_csv(const CampaignReport& report) {
  std::string csv = "sample_id,success,queries,j,l0,l2,linf,initial_sample_id\n";
  for (const ReportRow& row : report.rows) {
    csv += csv_escape(row.sample_id);
    csv += ',';
    csv += row.success ? '1' : '0';
    csv += ',';
    csv += std::to_string(row.queries);
    csv += ',';
    csv += std::to_string(row.j);
    csv += ',';
    if (row.norms) {
      csv += format_double(row.norms->l0);
      csv += ',';
      csv += format_double(row.norms->l2);
      csv += ',';
      csv += format_double(row.norms->linf);
    } else {
      csv += ",,";
    }
    csv += ',';
    csv += csv_escape(row.initial_sample_id);
    csv += '\n';
  }
  return csv;
}

}  // namespace

void emit_report(const CampaignReport& report, ReportFormat format,
                 const std::filesystem::path& path) {
  if (format == ReportFormat::Json) {
    write_text(path, report_to_json(report).dump(2) + "\n");
  } else {
    write_text(path, report_to_csv(report));
  }
}

CampaignReport load_report_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open report file: " + path.string());
  }
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IoError("malformed report file " + path.string() + ": " + e.what());
  }
  try {
    return report_from_json(doc);
  } catch (const json::exception& e) {
    throw IoError("report file " + path.string() + " is missing fields: " + e.what());
  }
}

void emit_sweep(const SweepReport& report, ReportFormat format,
                const std::filesystem::path& path) {
  if (format == ReportFormat::Json) {
    ordered_json doc;
    doc["version"] = 1;
    ordered_json rates = ordered_json::array();
    for (const SweepRate& rate : report.rates) {
      ordered_json item;
      item["rate_percent"] = rate.rate_percent;
      item["k"] = rate.k;
      item["report"] = report_to_json(rate.report);
      rates.push_back(std::move(item));
    }
    doc["rates"] = std::move(rates);
    doc["fr_non_decreasing"] = report.fr_non_decreasing;
    write_text(path, doc.dump(2) + "\n");
    return;
  }
  std::string csv = "rate_percent,k,fooling_rate,average_queries,total_queries\n";
  for (const SweepRate& rate : report.rates) {
    csv += format_double(rate.rate_percent);
    csv += ',';
    csv += std::to_string(rate.k);
    csv += ',';
    csv += format_double(rate.report.fooling_rate);
    csv += ',';
    if (rate.report.average_queries) {
      csv += format_double(*rate.report.average_queries);
    }
    csv += ',';
    csv += std::to_string(rate.report.total_queries);
    csv += '\n';
  }
  write_text(path, csv);
}

std::vector<DictionaryStatsRow> dictionary_stats(const CampaignReport& report) {
  if (report.mode != "D") {
    return {};
  }
  return stats_from_rows(report.rows);
}

}  // namespace lsdat
