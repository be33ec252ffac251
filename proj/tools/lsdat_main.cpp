// lsdat: decision-based black-box attacks through low-rank and sparse
// decomposition. Subcommands: attack, sweep-l0, dict-stats.

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "lsdat/errors.hpp"
#include "lsdat/harness.hpp"
#include "lsdat/log.hpp"

#include <CLI11.hpp>

namespace {

struct CommonOptions {
  std::string manifest;
  std::string oracle;
  double alpha = 0.05;
  int max_iter = 20;
  int explore = 100;
  std::string mode = "R";
  std::string dict;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool sequential = false;
  bool verify_clean = false;
  bool strict = false;
  std::string out;
  std::string format = "csv";
};

void add_common_options(CLI::App& cmd, CommonOptions& opt) {
  cmd.add_option("--manifest", opt.manifest, "Dataset manifest (JSON)")->required();
  cmd.add_option("--oracle", opt.oracle,
                 "Oracle descriptor: linear:<file>|centroid:<file>|remote:<url>|replay:<trace>")
      ->required();
  cmd.add_option("--alpha", opt.alpha, "Sparse traversing rate");
  cmd.add_option("--max-iter", opt.max_iter, "Query ceiling per candidate");
  cmd.add_option("--explore", opt.explore, "Initial adversarial sample budget G");
  cmd.add_option("--mode", opt.mode, "Candidate selection: R random, D dictionary")
      ->check(CLI::IsMember({"R", "D"}));
  cmd.add_option("--dict", opt.dict, "Dictionary file (required in mode D)");
  cmd.add_option("--seed", opt.seed, "Campaign seed");
  cmd.add_option("--jobs", opt.jobs, "Worker threads over target images");
  cmd.add_flag("--sequential", opt.sequential, "Force strictly sequential attacks");
  cmd.add_flag("--verify-clean", opt.verify_clean,
               "Drop images the oracle already misclassifies");
  cmd.add_flag("--strict", opt.strict, "Abort the campaign on the first oracle error");
  cmd.add_option("--out", opt.out, "Report output path")->required();
  cmd.add_option("--format", opt.format, "Report format")
      ->check(CLI::IsMember({"csv", "json"}));
}

lsdat::CampaignConfig config_from(const CommonOptions& opt) {
  lsdat::CampaignConfig cfg;
  cfg.oracle_descriptor = opt.oracle;
  cfg.alpha = opt.alpha;
  cfg.max_iter = opt.max_iter;
  cfg.explore = opt.explore;
  cfg.mode = lsdat::dictionary_mode_from_string(opt.mode);
  cfg.dictionary_path = opt.dict;
  cfg.seed = opt.seed;
  cfg.jobs = opt.sequential ? 1 : opt.jobs;
  cfg.verify_clean = opt.verify_clean;
  cfg.strict_errors = opt.strict;
  return cfg;
}

lsdat::PerturbationConstraint make_constraint(const std::string& norm, double budget) {
  if (norm == "l0") {
    if (budget < 1.0 || budget != std::floor(budget)) {
      throw lsdat::ConfigError("l0 budget must be a positive integer coordinate count");
    }
    return lsdat::L0Budget{static_cast<std::size_t>(budget)};
  }
  if (norm == "l2") {
    return lsdat::L2Budget{budget};
  }
  return lsdat::LinfBudget{budget};
}

/// A campaign where every image hit an oracle hard error produced no
/// usable attack result at all; report it as an oracle failure.
bool all_rows_errored(const lsdat::CampaignReport& report) {
  if (report.rows.empty()) {
    return false;
  }
  for (const lsdat::ReportRow& row : report.rows) {
    if (row.error.empty()) {
      return false;
    }
  }
  return true;
}

void print_campaign_summary(const lsdat::CampaignReport& report) {
  std::printf("mode=%s norm=%s budget=%g dataset=%llu fooling_rate=%.4f",
              report.mode.c_str(), report.norm.c_str(), report.budget,
              static_cast<unsigned long long>(report.dataset_size), report.fooling_rate);
  if (report.average_queries) {
    std::printf(" average_queries=%.2f", *report.average_queries);
  }
  std::printf(" total_queries=%llu\n",
              static_cast<unsigned long long>(report.total_queries));
}

int run_attack(const CommonOptions& opt, const std::string& norm, double budget) {
  lsdat::CampaignConfig cfg = config_from(opt);
  cfg.constraint = make_constraint(norm, budget);
  cfg.validate();

  const lsdat::Dataset data = lsdat::load_dataset(opt.manifest);
  auto oracle = lsdat::make_oracle(opt.oracle, data.class_count);
  const lsdat::CampaignReport report = lsdat::run_campaign(cfg, data, *oracle);
  lsdat::emit_report(report, lsdat::report_format_from_string(opt.format), opt.out);
  print_campaign_summary(report);
  if (all_rows_errored(report)) {
    std::fprintf(stderr, "lsdat: every image failed with an oracle error\n");
    return 2;
  }
  return 0;
}

int run_sweep(const CommonOptions& opt, const std::vector<double>& rates) {
  lsdat::CampaignConfig cfg = config_from(opt);
  cfg.validate();

  const lsdat::Dataset data = lsdat::load_dataset(opt.manifest);
  auto oracle = lsdat::make_oracle(opt.oracle, data.class_count);
  const lsdat::SweepReport sweep = lsdat::sweep_l0(cfg, data, *oracle, rates);
  lsdat::emit_sweep(sweep, lsdat::report_format_from_string(opt.format), opt.out);
  for (const lsdat::SweepRate& rate : sweep.rates) {
    std::printf("rate=%g%% k=%zu ", rate.rate_percent, rate.k);
    print_campaign_summary(rate.report);
  }
  return 0;
}

int run_dict_stats(const std::string& report_path) {
  const lsdat::CampaignReport report = lsdat::load_report_json(report_path);
  const std::vector<lsdat::DictionaryStatsRow> rows = lsdat::dictionary_stats(report);
  std::printf("sample_id,successes,mean_queries,share\n");
  for (const lsdat::DictionaryStatsRow& row : rows) {
    std::printf("%s,%llu,%.17g,%.17g\n", row.sample_id.c_str(),
                static_cast<unsigned long long>(row.successes), row.mean_queries, row.share);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank and sparse decomposition based black-box attack"};
  app.require_subcommand(1);

  CommonOptions attack_opt;
  std::string norm;
  double budget = 0.0;
  CLI::App* attack_cmd = app.add_subcommand("attack", "Run an attack campaign");
  attack_cmd->add_option("--norm", norm, "Perturbation norm")
      ->required()
      ->check(CLI::IsMember({"l0", "l2", "linf"}));
  attack_cmd->add_option("--budget", budget, "Norm budget: k, epsilon, or sigma")->required();
  add_common_options(*attack_cmd, attack_opt);

  CommonOptions sweep_opt;
  std::vector<double> rates;
  CLI::App* sweep_cmd = app.add_subcommand("sweep-l0", "Sweep l0 perturbation rates");
  sweep_cmd->add_option("--rates", rates, "Perturbation rates in percent")
      ->required()
      ->delimiter(',');
  add_common_options(*sweep_cmd, sweep_opt);

  std::string report_path;
  CLI::App* stats_cmd = app.add_subcommand("dict-stats", "Summarize dictionary contributions");
  stats_cmd->add_option("--report", report_path, "Campaign report (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // bad flags are config errors
  }

  try {
    if (app.got_subcommand(attack_cmd)) {
      return run_attack(attack_opt, norm, budget);
    }
    if (app.got_subcommand(sweep_cmd)) {
      return run_sweep(sweep_opt, rates);
    }
    return run_dict_stats(report_path);
  } catch (const lsdat::ConfigError& e) {
    std::fprintf(stderr, "lsdat: config error: %s\n", e.what());
    return 1;
  } catch (const lsdat::IoError& e) {
    std::fprintf(stderr, "lsdat: io error: %s\n", e.what());
    return 3;
  } catch (const lsdat::OracleError& e) {
    std::fprintf(stderr, "lsdat: oracle failure: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "lsdat: %s\n", e.what());
    return 1;
  }
}
