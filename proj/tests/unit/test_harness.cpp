#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "lsdat/errors.hpp"
#include "lsdat/harness.hpp"
#include "lsdat/image_io.hpp"
#include "support/synthetic.hpp"

#include <json.hpp>

using namespace lsdat;
using lsdat::testsupport::Benchmark;
using lsdat::testsupport::make_dict_benchmark;
using lsdat::testsupport::make_sweep_benchmark;
using lsdat::testsupport::ScriptedOracle;
using lsdat::testsupport::TempDir;
using lsdat::testsupport::write_benchmark_manifest;
using lsdat::testsupport::write_centroid_oracle_file;
using nlohmann::json;

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void spit(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

fs::path write_json(const fs::path& path, const json& doc) {
  spit(path, doc.dump(2) + "\n");
  return path;
}

fs::path write_tiny_image(const fs::path& dir, const std::string& name) {
  ImageTensor img(2, 2, 1);
  img.data = {0.1, 0.2, 0.3, 0.4};
  const fs::path p = dir / name;
  write_image(p, img);
  return p;
}

json manifest_entry(const std::string& id, const std::string& path, int label) {
  return json{{"sample_id", id}, {"path", path}, {"label", label}};
}

CampaignConfig base_config() {
  CampaignConfig cfg;
  cfg.oracle_descriptor = "centroid:test";
  cfg.constraint = LinfBudget{0.5};
  cfg.alpha = 0.05;
  cfg.max_iter = 20;
  cfg.explore = 100;
  cfg.seed = 7;
  return cfg;
}

}  // namespace

TEST_CASE("load_dataset round-trips the benchmark manifest") {
  TempDir tmp;
  const Benchmark bench = make_dict_benchmark(1, 11);
  const fs::path manifest = write_benchmark_manifest(bench, tmp.path());

  const Dataset loaded = load_dataset(manifest);
  CHECK(loaded.class_count == bench.dataset.class_count);
  REQUIRE(loaded.samples.size() == bench.dataset.samples.size());
  for (std::size_t i = 0; i < loaded.samples.size(); ++i) {
    const DatasetSample& got = loaded.samples[i];
    const DatasetSample& want = bench.dataset.samples[i];
    CHECK(got.sample_id == want.sample_id);
    CHECK(got.label == want.label);
    REQUIRE(got.image.same_shape(want.image));
    CHECK(got.image.data == want.image.data);  // .lsdr files are bit-exact
  }

  const DatasetSample* found = loaded.find(bench.planted_sample_id);
  REQUIRE(found != nullptr);
  CHECK(found->label == 9);
  CHECK(loaded.find("no-such-sample") == nullptr);
}

TEST_CASE("load_dataset rejects broken manifests") {
  TempDir tmp;
  const fs::path img = write_tiny_image(tmp.path(), "ok.lsdr");

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_dataset(tmp.path() / "absent.json"), IoError);
  }
  SUBCASE("malformed JSON") {
    spit(tmp.path() / "broken.json", "{nope");
    CHECK_THROWS_AS(load_dataset(tmp.path() / "broken.json"), IoError);
  }
  SUBCASE("class_count missing or too small") {
    const fs::path no_count =
        write_json(tmp.path() / "a.json", json{{"version", 1}, {"images", json::array()}});
    CHECK_THROWS_AS(load_dataset(no_count), ConfigError);
    const fs::path one_class = write_json(
        tmp.path() / "b.json",
        json{{"version", 1}, {"class_count", 1}, {"images", json::array()}});
    CHECK_THROWS_AS(load_dataset(one_class), ConfigError);
  }
  SUBCASE("images array missing") {
    const fs::path p =
        write_json(tmp.path() / "c.json", json{{"version", 1}, {"class_count", 3}});
    CHECK_THROWS_AS(load_dataset(p), ConfigError);
  }
  SUBCASE("empty manifest loads as an empty dataset") {
    const fs::path p = write_json(
        tmp.path() / "empty.json",
        json{{"version", 1}, {"class_count", 3}, {"images", json::array()}});
    const Dataset ds = load_dataset(p);
    CHECK(ds.samples.empty());
    CHECK(ds.class_count == 3);
  }
  SUBCASE("duplicate sample ids") {
    const fs::path p = write_json(
        tmp.path() / "dup.json",
        json{{"version", 1},
             {"class_count", 3},
             {"images", json::array({manifest_entry("twin", "ok.lsdr", 0),
                                     manifest_entry("twin", "ok.lsdr", 1)})}});
    CHECK_THROWS_AS(load_dataset(p), ConfigError);
  }
  SUBCASE("label out of range") {
    const fs::path over = write_json(
        tmp.path() / "over.json",
        json{{"version", 1},
             {"class_count", 3},
             {"images", json::array({manifest_entry("s", "ok.lsdr", 3)})}});
    CHECK_THROWS_AS(load_dataset(over), ConfigError);
    const fs::path neg = write_json(
        tmp.path() / "neg.json",
        json{{"version", 1},
             {"class_count", 3},
             {"images", json::array({manifest_entry("s", "ok.lsdr", -1)})}});
    CHECK_THROWS_AS(load_dataset(neg), ConfigError);
  }
  SUBCASE("entry without a path") {
    const fs::path p = write_json(
        tmp.path() / "nopath.json",
        json{{"version", 1},
             {"class_count", 3},
             {"images", json::array({json{{"sample_id", "s"}, {"label", 0}}})}});
    CHECK_THROWS_AS(load_dataset(p), ConfigError);
  }
  SUBCASE("bad image path names the file") {
    const fs::path p = write_json(
        tmp.path() / "badpath.json",
        json{{"version", 1},
             {"class_count", 3},
             {"images", json::array({manifest_entry("s", "missing.lsdr", 0)})}});
    try {
      load_dataset(p);
      FAIL("expected IoError");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find("missing.lsdr") != std::string::npos);
    }
  }
  SUBCASE("undecodable image") {
    spit(tmp.path() / "junk.lsdr", "this is not a raster");
    const fs::path p = write_json(
        tmp.path() / "junk.json",
        json{{"version", 1},
             {"class_count", 3},
             {"images", json::array({manifest_entry("s", "junk.lsdr", 0)})}});
    CHECK_THROWS_AS(load_dataset(p), IoError);
  }
}

TEST_CASE("oracle files load and dispatch on kind") {
  TempDir tmp;
  const Benchmark bench = make_dict_benchmark(1, 19);
  const fs::path centroid_file = write_centroid_oracle_file(bench, tmp.path());

  SUBCASE("centroid file") {
    const auto oracle = make_oracle("centroid:" + centroid_file.string(), 10);
    CHECK(oracle->class_count() == 10);
    for (int cls : {0, 4, 9}) {
      CHECK(oracle->query(bench.centroids[static_cast<std::size_t>(cls)]) == cls);
    }
  }
  SUBCASE("expected class count of zero skips the agreement check") {
    const auto oracle = load_oracle_file(centroid_file, 0);
    CHECK(oracle->class_count() == 10);
  }
  SUBCASE("linear file") {
    const fs::path p = write_json(
        tmp.path() / "linear.json",
        json{{"kind", "linear"},
             {"class_count", 3},
             {"height", 1},
             {"width", 2},
             {"channels", 1},
             {"weights", json::array({json::array({1.0, 0.0}), json::array({0.0, 1.0}),
                                      json::array({-1.0, -1.0})})},
             {"biases", json::array({0.0, 0.0, 0.2})}});
    const auto oracle = make_oracle("linear:" + p.string(), 3);
    CHECK(oracle->class_count() == 3);
    ImageTensor img(1, 2, 1);
    img.data = {0.9, 0.1};
    CHECK(oracle->query(img) == 0);
    img.data = {0.0, 0.0};
    CHECK(oracle->query(img) == 2);
  }
  SUBCASE("replay descriptor") {
    const fs::path trace = tmp.path() / "trace.json";
    save_trace(trace, {{1234u, 2}}, 5);
    const auto oracle = make_oracle("replay:" + trace.string(), 5);
    CHECK(oracle->class_count() == 5);
    CHECK_THROWS_AS(make_oracle("replay:" + trace.string(), 10), ConfigError);
  }
  SUBCASE("remote descriptor builds without contacting the server") {
    const auto oracle = make_oracle("remote:http://127.0.0.1:1", 4);
    CHECK(oracle->class_count() == 4);
  }
}

TEST_CASE("oracle descriptors and files reject bad shapes") {
  TempDir tmp;
  const Benchmark bench = make_dict_benchmark(1, 19);
  const fs::path centroid_file = write_centroid_oracle_file(bench, tmp.path());

  SUBCASE("descriptor grammar") {
    CHECK_THROWS_AS(make_oracle("centroid", 10), ConfigError);
    CHECK_THROWS_AS(make_oracle(":file", 10), ConfigError);
    CHECK_THROWS_AS(make_oracle("linear:", 10), ConfigError);
    CHECK_THROWS_AS(make_oracle("magic:file", 10), ConfigError);
  }
  SUBCASE("descriptor kind must agree with the file") {
    CHECK_THROWS_AS(make_oracle("linear:" + centroid_file.string(), 10), ConfigError);
  }
  SUBCASE("class count must agree with the manifest") {
    CHECK_THROWS_AS(make_oracle("centroid:" + centroid_file.string(), 7), ConfigError);
  }
  SUBCASE("file problems") {
    CHECK_THROWS_AS(load_oracle_file(tmp.path() / "absent.json", 10), IoError);
    spit(tmp.path() / "broken.json", "[[[");
    CHECK_THROWS_AS(load_oracle_file(tmp.path() / "broken.json", 10), IoError);
    const fs::path unknown = write_json(
        tmp.path() / "unknown.json",
        json{{"kind", "forest"}, {"class_count", 2}, {"height", 1}, {"width", 1},
             {"channels", 1}});
    CHECK_THROWS_AS(load_oracle_file(unknown, 2), ConfigError);
    const fs::path short_centroid = write_json(
        tmp.path() / "short.json",
        json{{"kind", "centroid"}, {"class_count", 2}, {"height", 1}, {"width", 2},
             {"channels", 1},
             {"centroids", json::array({json::array({0.1, 0.2})})}});
    CHECK_THROWS_AS(load_oracle_file(short_centroid, 2), ConfigError);
    const fs::path ragged = write_json(
        tmp.path() / "ragged.json",
        json{{"kind", "linear"}, {"class_count", 2}, {"height", 1}, {"width", 2},
             {"channels", 1},
             {"weights", json::array({json::array({1.0, 0.0}), json::array({1.0})})},
             {"biases", json::array({0.0, 0.0})}});
    CHECK_THROWS_AS(load_oracle_file(ragged, 2), ConfigError);
  }
}

TEST_CASE("campaign configs validate their pieces") {
  CampaignConfig cfg = base_config();
  CHECK_NOTHROW(cfg.validate());

  SUBCASE("alpha") {
    cfg.alpha = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.alpha = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("iteration and exploration budgets") {
    cfg.max_iter = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = base_config();
    cfg.explore = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = base_config();
    cfg.jobs = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("constraint") {
    cfg.constraint = L2Budget{-1.0};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("mode D needs a dictionary path") {
    cfg.mode = DictionaryMode::Dictionary;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.dictionary_path = "dict.json";
    CHECK_NOTHROW(cfg.validate());
  }
}

TEST_CASE("run_campaign aggregates exactly what the rows say") {
  const Benchmark bench = make_dict_benchmark(2, 3);
  const auto oracle = make_centroid_oracle(bench.centroids);
  const CampaignConfig cfg = base_config();

  const CampaignReport rep = run_campaign(cfg, bench.dataset, *oracle);

  REQUIRE(rep.rows.size() == bench.dataset.samples.size());
  CHECK(rep.dataset_size == rep.rows.size());
  CHECK(rep.mode == "R");
  CHECK(rep.norm == "linf");
  CHECK(rep.budget == 0.5);
  CHECK(rep.dictionary_top.empty());
  CHECK(rep.clean_queries == 0);
  CHECK(rep.clean_removed.empty());

  // Accounting conservation: attack queries equal the oracle's counter.
  CHECK(oracle->read_counter().total == rep.total_queries);

  std::uint64_t successes = 0;
  std::uint64_t query_sum = 0;
  double success_queries = 0.0;
  double l2_sum = 0.0, l2_max = 0.0;
  for (const ReportRow& row : rep.rows) {
    query_sum += row.queries;
    const DatasetSample* target = bench.dataset.find(row.sample_id);
    REQUIRE(target != nullptr);
    if (row.success) {
      successes += 1;
      success_queries += static_cast<double>(row.queries);
      REQUIRE(row.norms.has_value());
      REQUIRE(row.norms_vs_input.has_value());
      l2_sum += row.norms->l2;
      l2_max = std::max(l2_max, row.norms->l2);
      REQUIRE(!row.initial_sample_id.empty());
      const DatasetSample* donor = bench.dataset.find(row.initial_sample_id);
      REQUIRE(donor != nullptr);
      CHECK(donor->label != target->label);
      // j full exhaustions preceded the winning candidate's partial walk.
      CHECK(row.queries > static_cast<std::uint64_t>(row.j) * 20);
      CHECK(row.queries <= static_cast<std::uint64_t>(row.j + 1) * 20);
    } else if (row.error.empty()) {
      CHECK(row.queries == static_cast<std::uint64_t>(row.j) * 20);
      CHECK(!row.norms.has_value());
      CHECK(row.initial_sample_id.empty());
    }
  }

  CHECK(rep.total_queries == query_sum);
  CHECK(rep.fooling_rate ==
        static_cast<double>(successes) / static_cast<double>(rep.rows.size()));
  REQUIRE(successes > 0);
  REQUIRE(rep.average_queries.has_value());
  CHECK(*rep.average_queries ==
        doctest::Approx(success_queries / static_cast<double>(successes)).epsilon(1e-12));
  REQUIRE(rep.l2_stats.has_value());
  CHECK(rep.l2_stats->mean ==
        doctest::Approx(l2_sum / static_cast<double>(successes)).epsilon(1e-12));
  CHECK(rep.l2_stats->max == l2_max);

  // Every smooth target flips through the planted donor, and the donor
  // itself flips by walking toward any smooth sparse component.
  CHECK(rep.fooling_rate == 1.0);
}

TEST_CASE("run_campaign on an empty dataset reports zero everything") {
  Dataset empty;
  empty.class_count = 10;
  ScriptedOracle oracle({}, 10);
  const CampaignReport rep = run_campaign(base_config(), empty, oracle);
  CHECK(rep.rows.empty());
  CHECK(rep.dataset_size == 0);
  CHECK(rep.fooling_rate == 0.0);
  CHECK(!rep.average_queries.has_value());
  CHECK(rep.total_queries == 0);
}

TEST_CASE("identical seeds reproduce byte-identical reports") {
  TempDir tmp;
  const Benchmark bench = make_dict_benchmark(1, 5);
  const CampaignConfig cfg = base_config();

  const auto oracle_a = make_centroid_oracle(bench.centroids);
  const auto oracle_b = make_centroid_oracle(bench.centroids);
  const CampaignReport rep_a = run_campaign(cfg, bench.dataset, *oracle_a);
  const CampaignReport rep_b = run_campaign(cfg, bench.dataset, *oracle_b);
  CHECK(rep_a == rep_b);

  emit_report(rep_a, ReportFormat::Json, tmp.path() / "a.json");
  emit_report(rep_b, ReportFormat::Json, tmp.path() / "b.json");
  CHECK(slurp(tmp.path() / "a.json") == slurp(tmp.path() / "b.json"));
  emit_report(rep_a, ReportFormat::Csv, tmp.path() / "a.csv");
  emit_report(rep_b, ReportFormat::Csv, tmp.path() / "b.csv");
  CHECK(slurp(tmp.path() / "a.csv") == slurp(tmp.path() / "b.csv"));

  // Mode R work is isolated per image, so fanning out cannot change rows.
  CampaignConfig parallel = cfg;
  parallel.jobs = 4;
  const auto oracle_c = make_centroid_oracle(bench.centroids);
  const CampaignReport rep_c = run_campaign(parallel, bench.dataset, *oracle_c);
  CHECK(rep_c == rep_a);
}

TEST_CASE("verify-clean filters mislabeled samples and tallies apart") {
  const Benchmark bench = make_dict_benchmark(1, 9);
  Dataset ds = bench.dataset;
  for (DatasetSample& s : ds.samples) {
    if (s.sample_id == "c3_s0") s.label = 4;  // oracle will disagree
  }
  const auto oracle = make_centroid_oracle(bench.centroids);
  CampaignConfig cfg = base_config();
  cfg.verify_clean = true;

  const CampaignReport rep = run_campaign(cfg, ds, *oracle);

  CHECK(rep.clean_queries == ds.samples.size());
  REQUIRE(rep.clean_removed.size() == 1);
  CHECK(rep.clean_removed[0] == "c3_s0");
  CHECK(rep.dataset_size == ds.samples.size() - 1);
  CHECK(rep.rows.size() == ds.samples.size() - 1);
  for (const ReportRow& row : rep.rows) {
    CHECK(row.sample_id != "c3_s0");
  }
  CHECK(oracle->read_counter().total == rep.total_queries + rep.clean_queries);
}

TEST_CASE("oracle failures poison rows, not the campaign, unless strict") {
  const Benchmark bench = make_dict_benchmark(1, 2);

  SUBCASE("lenient mode marks rows errored and keeps the denominator") {
    ScriptedOracle oracle(std::vector<Label>(7, 0), 10);
    const CampaignReport rep = run_campaign(base_config(), bench.dataset, oracle);

    REQUIRE(rep.rows.size() == bench.dataset.samples.size());
    CHECK(rep.fooling_rate == 0.0);
    CHECK(!rep.average_queries.has_value());
    CHECK(!rep.l0_stats.has_value());
    CHECK(rep.total_queries == 7);
    CHECK(oracle.consumed() == 7);
    // The first target is class 0; seven scripted zeros never flip it,
    // then the script runs dry mid-walk.
    CHECK(rep.rows[0].error != "");
    CHECK(rep.rows[0].queries == 7);
    for (std::size_t i = 1; i < rep.rows.size(); ++i) {
      CHECK(!rep.rows[i].success);
      CHECK(rep.rows[i].error != "");
      CHECK(rep.rows[i].queries == 0);
    }
  }
  SUBCASE("strict mode aborts on the first hard error") {
    ScriptedOracle oracle(std::vector<Label>(7, 0), 10);
    CampaignConfig cfg = base_config();
    cfg.strict_errors = true;
    try {
      run_campaign(cfg, bench.dataset, oracle);
      FAIL("expected OracleError");
    } catch (const OracleError& e) {
      CHECK(std::string(e.what()).find("c0_s0") != std::string::npos);
    }
  }
}

TEST_CASE("mode R leaves the dictionary file alone") {
  TempDir tmp;
  const Benchmark bench = make_dict_benchmark(1, 31);
  const auto oracle = make_centroid_oracle(bench.centroids);
  CampaignConfig cfg = base_config();
  cfg.dictionary_path = tmp.path() / "dict.json";

  const CampaignReport rep = run_campaign(cfg, bench.dataset, *oracle);
  CHECK(rep.dictionary_top.empty());
  CHECK(!fs::exists(cfg.dictionary_path));

  spit(cfg.dictionary_path, "not a dictionary");
  run_campaign(cfg, bench.dataset, *oracle);
  CHECK(slurp(cfg.dictionary_path) == "not a dictionary");
}

TEST_CASE("mode D builds, persists and reuses the dictionary") {
  TempDir tmp;
  const Benchmark bench = make_dict_benchmark(2, 13);
  CampaignConfig cfg = base_config();
  cfg.mode = DictionaryMode::Dictionary;
  cfg.dictionary_path = tmp.path() / "dict.json";
  cfg.seed = 3;

  const auto oracle_cold = make_centroid_oracle(bench.centroids);
  const CampaignReport cold = run_campaign(cfg, bench.dataset, *oracle_cold);

  REQUIRE(fs::exists(cfg.dictionary_path));
  REQUIRE(!cold.dictionary_top.empty());
  CHECK(cold.dictionary_top[0].sample_id == bench.planted_sample_id);
  CHECK(cold.dictionary_top[0].share > 0.9);

  const HierarchicalDictionary dict = HierarchicalDictionary::load(cfg.dictionary_path);
  dict.check_invariants();
  REQUIRE(dict.global_size() >= 1);
  CHECK(dict.top_global(1)[0].sample_id == bench.planted_sample_id);
  CHECK(dict.top_global(1)[0].score == cold.dictionary_top[0].successes);

  // Warm start: the saved dictionary promotes the planted donor to the
  // front of every candidate list, so no exploration is wasted.
  cfg.seed = 4;
  const auto oracle_warm = make_centroid_oracle(bench.centroids);
  const CampaignReport warm = run_campaign(cfg, bench.dataset, *oracle_warm);
  CHECK(warm.fooling_rate == 1.0);
  for (const ReportRow& row : warm.rows) {
    CHECK(row.j == 0);
  }
  REQUIRE(warm.average_queries.has_value());
  REQUIRE(cold.average_queries.has_value());
  CHECK(*warm.average_queries <= 20.0);
  CHECK(*warm.average_queries < *cold.average_queries);

  // Same seed in mode R pays the full exploration cost every time.
  CampaignConfig random_cfg = base_config();
  random_cfg.seed = 4;
  const auto oracle_r = make_centroid_oracle(bench.centroids);
  const CampaignReport random_rep = run_campaign(random_cfg, bench.dataset, *oracle_r);
  REQUIRE(random_rep.average_queries.has_value());
  CHECK(*warm.average_queries <= *random_rep.average_queries);
}

TEST_CASE("a one-query budget spends exactly one query per image") {
  const Benchmark bench = make_dict_benchmark(1, 21);
  const auto oracle = make_centroid_oracle(bench.centroids);
  CampaignConfig cfg = base_config();
  cfg.max_iter = 1;
  cfg.explore = 1;
  cfg.alpha = 1.0;

  const CampaignReport rep = run_campaign(cfg, bench.dataset, *oracle);
  CHECK(rep.total_queries == rep.rows.size());
  for (const ReportRow& row : rep.rows) {
    CHECK(row.queries == 1);
  }
  CHECK(oracle->read_counter().total == rep.rows.size());
}

TEST_CASE("run_campaign cross-checks oracle and cache configs") {
  const Benchmark bench = make_dict_benchmark(1, 23);

  SUBCASE("oracle with too few classes") {
    ScriptedOracle narrow({0, 1, 2}, 3);
    CHECK_THROWS_AS(run_campaign(base_config(), bench.dataset, narrow), ConfigError);
  }
  SUBCASE("cache built with a different RPCA config") {
    const auto oracle = make_centroid_oracle(bench.centroids);
    CampaignConfig cfg = base_config();
    cfg.rpca.tolerance = 1e-5;
    LsdCache cache;  // default config, does not match cfg.rpca
    CHECK_THROWS_AS(run_campaign(cfg, bench.dataset, *oracle, cache), ConfigError);
  }
  SUBCASE("a matching cache is reused across campaigns") {
    const auto oracle = make_centroid_oracle(bench.centroids);
    const CampaignConfig cfg = base_config();
    LsdCache cache(cfg.rpca);
    const CampaignReport first = run_campaign(cfg, bench.dataset, *oracle, cache);
    const std::size_t computed_once = cache.compute_count();
    CHECK(computed_once <= bench.dataset.samples.size());
    CHECK(computed_once >= 1);
    const CampaignReport second = run_campaign(cfg, bench.dataset, *oracle, cache);
    CHECK(cache.compute_count() == computed_once);  // nothing new decomposed
    CHECK(second == first);
  }
}

TEST_CASE("sweep_l0 maps rates to coordinate budgets and tracks the trend") {
  const Benchmark bench = make_sweep_benchmark(1, 17);
  const auto oracle = make_centroid_oracle(bench.centroids);
  const CampaignConfig cfg = base_config();

  // 16x16 grayscale: 256 coordinates, so k = {1, 3, 6, 11, 256}.
  const SweepReport sweep =
      sweep_l0(cfg, bench.dataset, *oracle, {4.29, 0.5, 100.0, 2.36, 1.0});

  REQUIRE(sweep.rates.size() == 5);
  const std::vector<double> want_rates = {0.5, 1.0, 2.36, 4.29, 100.0};
  const std::vector<std::size_t> want_k = {1, 3, 6, 11, 256};
  for (std::size_t i = 0; i < sweep.rates.size(); ++i) {
    CHECK(sweep.rates[i].rate_percent == want_rates[i]);
    CHECK(sweep.rates[i].k == want_k[i]);
    CHECK(sweep.rates[i].report.norm == "l0");
    CHECK(sweep.rates[i].report.budget == static_cast<double>(want_k[i]));
    CHECK(sweep.rates[i].report.rows.size() == bench.dataset.samples.size());
  }

  // The benchmark's donors unlock strictly more classes as k grows:
  // 3, 6, 9, 11, 11 successes out of 11 samples.
  CHECK(sweep.fr_non_decreasing);
  const std::vector<double> fr = {
      sweep.rates[0].report.fooling_rate, sweep.rates[1].report.fooling_rate,
      sweep.rates[2].report.fooling_rate, sweep.rates[3].report.fooling_rate,
      sweep.rates[4].report.fooling_rate};
  CHECK(fr[0] == doctest::Approx(3.0 / 11.0));
  CHECK(fr[1] == doctest::Approx(6.0 / 11.0));
  CHECK(fr[2] == doctest::Approx(9.0 / 11.0));
  CHECK(fr[3] == doctest::Approx(1.0));
  CHECK(fr[4] == doctest::Approx(1.0));
}

TEST_CASE("sweep_l0 rejects bad rates and ragged datasets") {
  const Benchmark bench = make_sweep_benchmark(1, 17);
  const auto oracle = make_centroid_oracle(bench.centroids);
  const CampaignConfig cfg = base_config();

  CHECK_THROWS_AS(sweep_l0(cfg, bench.dataset, *oracle, {}), ConfigError);
  CHECK_THROWS_AS(sweep_l0(cfg, bench.dataset, *oracle, {0.0}), ConfigError);
  CHECK_THROWS_AS(sweep_l0(cfg, bench.dataset, *oracle, {101.0}), ConfigError);

  Dataset ragged;
  ragged.class_count = 2;
  ragged.samples.push_back({"a", 0, ImageTensor(4, 4, 1)});
  ragged.samples.push_back({"b", 1, ImageTensor(4, 5, 1)});
  CHECK_THROWS_AS(sweep_l0(cfg, ragged, *oracle, {1.0}), ConfigError);
}

TEST_CASE("reports round-trip through JSON") {
  TempDir tmp;
  const Benchmark bench = make_dict_benchmark(1, 5);
  const auto oracle = make_centroid_oracle(bench.centroids);
  const CampaignReport rep = run_campaign(base_config(), bench.dataset, *oracle);

  const fs::path p = tmp.path() / "report.json";
  emit_report(rep, ReportFormat::Json, p);
  const CampaignReport back = load_report_json(p);
  CHECK(back == rep);

  SUBCASE("loader errors") {
    CHECK_THROWS_AS(load_report_json(tmp.path() / "absent.json"), IoError);
    spit(tmp.path() / "broken.json", "}{");
    CHECK_THROWS_AS(load_report_json(tmp.path() / "broken.json"), IoError);
    write_json(tmp.path() / "hollow.json", json{{"version", 1}});
    CHECK_THROWS_AS(load_report_json(tmp.path() / "hollow.json"), IoError);
  }
}

TEST_CASE("CSV output matches the documented column layout") {
  TempDir tmp;
  CampaignReport rep;

  SUBCASE("empty report is header-only") {
    emit_report(rep, ReportFormat::Csv, tmp.path() / "empty.csv");
    CHECK(slurp(tmp.path() / "empty.csv") ==
          "sample_id,success,queries,j,l0,l2,linf,initial_sample_id\n");
  }
  SUBCASE("success, failure and quoting") {
    ReportRow hit;
    hit.sample_id = "a1";
    hit.success = true;
    hit.queries = 24;
    hit.j = 2;
    hit.norms = PerturbationNorms{3.0, 0.5, 0.25};
    hit.norms_vs_input = hit.norms;
    hit.initial_sample_id = "don,or";
    ReportRow miss;
    miss.sample_id = "b2";
    miss.queries = 40;
    miss.j = 2;
    ReportRow quoted;
    quoted.sample_id = "q\"x";
    quoted.queries = 5;
    rep.rows = {hit, miss, quoted};

    emit_report(rep, ReportFormat::Csv, tmp.path() / "rows.csv");
    CHECK(slurp(tmp.path() / "rows.csv") ==
          "sample_id,success,queries,j,l0,l2,linf,initial_sample_id\n"
          "a1,1,24,2,3,0.5,0.25,\"don,or\"\n"
          "b2,0,40,2,,,,\n"
          "\"q\"\"x\",0,5,0,,,,\n");
  }
}

TEST_CASE("sweep reports emit both formats") {
  TempDir tmp;
  SweepReport sweep;
  sweep.fr_non_decreasing = true;
  SweepRate low;
  low.rate_percent = 0.5;
  low.k = 1;
  low.report.fooling_rate = 0.25;
  low.report.average_queries = 12.5;
  low.report.total_queries = 50;
  SweepRate high;
  high.rate_percent = 1.0;
  high.k = 3;
  high.report.fooling_rate = 0.5;
  high.report.total_queries = 80;  // no successes: average stays null
  sweep.rates = {low, high};

  emit_sweep(sweep, ReportFormat::Csv, tmp.path() / "sweep.csv");
  CHECK(slurp(tmp.path() / "sweep.csv") ==
        "rate_percent,k,fooling_rate,average_queries,total_queries\n"
        "0.5,1,0.25,12.5,50\n"
        "1,3,0.5,,80\n");

  emit_sweep(sweep, ReportFormat::Json, tmp.path() / "sweep.json");
  const json doc = json::parse(slurp(tmp.path() / "sweep.json"));
  CHECK(doc.at("fr_non_decreasing") == true);
  REQUIRE(doc.at("rates").size() == 2);
  CHECK(doc.at("rates")[0].at("rate_percent") == 0.5);
  CHECK(doc.at("rates")[0].at("k") == 1);
  CHECK(doc.at("rates")[1].at("report").at("total_queries") == 80);
}

TEST_CASE("dictionary_stats summarizes successful donors") {
  CampaignReport rep;
  rep.mode = "D";
  const auto row = [](const char* id, bool ok, std::uint64_t q, const char* donor) {
    ReportRow r;
    r.sample_id = id;
    r.success = ok;
    r.queries = q;
    r.initial_sample_id = donor;
    return r;
  };
  rep.rows = {row("t1", true, 10, "A"), row("t2", true, 20, "A"),
              row("t3", true, 30, "A"), row("t4", true, 5, "B"),
              row("t5", false, 40, "")};

  const auto stats = dictionary_stats(rep);
  REQUIRE(stats.size() == 2);
  CHECK(stats[0].sample_id == "A");
  CHECK(stats[0].successes == 3);
  CHECK(stats[0].mean_queries == 20.0);
  CHECK(stats[0].share == 0.75);
  CHECK(stats[1].sample_id == "B");
  CHECK(stats[1].successes == 1);
  CHECK(stats[1].mean_queries == 5.0);
  CHECK(stats[1].share == 0.25);

  SUBCASE("ties order by sample id") {
    rep.rows = {row("t1", true, 4, "B"), row("t2", true, 2, "A")};
    const auto tied = dictionary_stats(rep);
    REQUIRE(tied.size() == 2);
    CHECK(tied[0].sample_id == "A");
    CHECK(tied[1].sample_id == "B");
    CHECK(tied[0].share == 0.5);
  }
  SUBCASE("mode R yields an empty table") {
    rep.mode = "R";
    CHECK(dictionary_stats(rep).empty());
  }
}

TEST_CASE("dataset pools draw without replacement and respect the label filter") {
  const Benchmark bench = make_dict_benchmark(2, 7);
  DatasetPool pool(bench.dataset, 99);
  std::unordered_set<std::string> used;

  std::size_t eligible = 0;
  for (const DatasetSample& s : bench.dataset.samples) {
    if (s.label != 0) eligible += 1;
  }

  for (std::size_t i = 0; i < eligible; ++i) {
    const auto ref = pool.draw(0, used);
    REQUIRE(ref.has_value());
    CHECK(ref->label != 0);
    CHECK(!used.contains(ref->sample_id));
    const DatasetSample* s = bench.dataset.find(ref->sample_id);
    REQUIRE(s != nullptr);
    CHECK(s->label == ref->label);
    used.insert(ref->sample_id);
  }
  CHECK(!pool.draw(0, used).has_value());

  // Same seed, same sequence.
  DatasetPool again_a(bench.dataset, 42);
  DatasetPool again_b(bench.dataset, 42);
  std::unordered_set<std::string> used_a, used_b;
  for (int i = 0; i < 10; ++i) {
    const auto a = again_a.draw(1, used_a);
    const auto b = again_b.draw(1, used_b);
    REQUIRE(a.has_value());
    REQUIRE(b.has_value());
    CHECK(a->sample_id == b->sample_id);
    used_a.insert(a->sample_id);
    used_b.insert(b->sample_id);
  }
}
