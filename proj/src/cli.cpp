#include "bpe/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "bpe/data.hpp"
#include "bpe/harness.hpp"
#include "bpe/rng.hpp"
#include "bpe/theory.hpp"

namespace bpe::cli {

namespace {

namespace fs = std::filesystem;

struct Logger {
  std::ostream* err;
  int level = 1;  // 0 quiet, 1 normal, 2 verbose

  void info(const std::string& msg) const {
    if (level >= 1) *err << "[info] " << msg << '\n';
  }
  void debug(const std::string& msg) const {
    if (level >= 2) *err << "[debug] " << msg << '\n';
  }
  void error(const std::string& msg) const { *err << "[error] " << msg << '\n'; }
};

std::string format_axis_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, int workers,
            bool seed_set, std::uint64_t seed, const Logger& log) {
  harness::ExperimentConfig cfg = harness::parse_config(config_path);
  if (seed_set) cfg.master_seed = seed;  // flag overrides the config value
  log.info("running " + std::to_string(cfg.datasets.size()) + " dataset(s) x " +
           std::to_string(cfg.seeds) + " seed(s), " + std::to_string(cfg.methods.size()) +
           " method(s), workers=" + std::to_string(workers));
  auto records = harness::run_experiment(cfg, workers);
  fs::create_directories(out_dir);
  std::string path = (fs::path(out_dir) / "results.csv").string();
  harness::write_results_csv(path, records);
  log.info("wrote " + std::to_string(records.size()) + " records to " + path);
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& axis_name,
              const std::string& out_dir, int workers, bool seed_set, std::uint64_t seed,
              const Logger& log) {
  harness::ExperimentConfig cfg = harness::parse_config(config_path);
  if (seed_set) cfg.master_seed = seed;
  auto axis = harness::sweep_axis_from_name(axis_name);
  if (!axis) throw std::invalid_argument("axis: expected lambda, delta or alpha");
  auto result = harness::sweep(cfg, *axis, workers);

  fs::create_directories(out_dir);
  std::ostringstream merged;
  merged << "axis,value,dataset,method,seed,accuracy,fit_seconds,predict_seconds,pool_size\n";
  for (const auto& [value, records] : result.runs) {
    std::string tag = axis_name + "_" + format_axis_value(value);
    fs::path run_dir = fs::path(out_dir) / tag;
    fs::create_directories(run_dir);
    harness::write_results_csv((run_dir / "results.csv").string(), records);
    std::istringstream rows(harness::results_to_csv(records));
    std::string line;
    std::getline(rows, line);  // skip the header
    while (std::getline(rows, line))
      if (!line.empty()) merged << axis_name << ',' << format_axis_value(value) << ',' << line
                                << '\n';
    log.info("completed " + tag);
  }
  std::string merged_path = (fs::path(out_dir) / "sweep_results.csv").string();
  std::ofstream out(merged_path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot write sweep results: " + merged_path);
  out << merged.str();
  log.info("wrote merged sweep results to " + merged_path);
  return 0;
}

int cmd_report(const std::string& results_path, const std::string& primary, std::ostream& out) {
  auto records = harness::read_results_csv(results_path);
  out << harness::format_report(records, primary);
  return 0;
}

int cmd_verify_theory(std::uint64_t seed, std::uint64_t trials, std::ostream& out,
                      const Logger& log) {
  std::vector<theory::SuiteReport> reports;
  reports.push_back(theory::check_exchange_lemma(seed, trials));
  reports.push_back(theory::check_feasibility_vs_grid(seed, std::max<std::uint64_t>(1, trials / 10), 1000));
  reports.push_back(theory::check_margin_monotonicity(seed, std::max<std::uint64_t>(1, trials / 10), 20));
  reports.push_back(theory::check_partition_covers(seed, trials));

  bool ok = true;
  out << "suite,trials,violations,status\n";
  for (const auto& r : reports) {
    out << r.name << ',' << r.trials << ',' << r.violations << ','
        << (r.ok() ? "pass" : "FAIL") << '\n';
    ok = ok && r.ok();
  }
  if (!ok) {
    log.error("theory checks failed");
    return 2;
  }
  return 0;
}

int cmd_profile(const std::string& dataset_path, const std::string& label_column,
                const std::string& out_path, double delta, const std::string& score_name,
                int bag_size, std::uint64_t seed, std::ostream& out, const Logger& log) {
  auto kind = score_kind_from_name(score_name);
  if (!kind) throw std::invalid_argument("score: unknown score kind: " + score_name);

  data::RawTable table = data::load_csv(dataset_path, label_column);
  data::Dataset ds = data::standardize(data::encode(table));
  log.info("loaded " + std::to_string(ds.size()) + " rows, " + std::to_string(ds.dim()) +
           " encoded features, " + std::to_string(ds.c) + " classes");

  harness::PoolSpec spec = harness::default_pool();
  if (bag_size > 0) {
    spec.members.resize(1);
    spec.members[0].kind = learners::LearnerKind::decision_tree;
    spec.bagged = true;
    spec.bag_size = bag_size;
  }
  auto members = harness::expand_pool(spec);
  learners::TrainedPool pool;
  std::uint64_t fit_seed = rng::derive_key(seed, "profile-fit");
  for (const auto& member : members) {
    pool.learners.push_back(harness::fit_member(member, ds.x, ds.y, ds.c, fit_seed));
    pool.ids.push_back(member.id);
  }
  auto profiles = build_profiles(pool, ds.x, delta, rng::derive_key(seed, "profiles"), *kind);
  save_profiles(out_path, profiles);

  out << "model_id,score_kind,mu,sigma,delta,n\n";
  char buf[128];
  for (const auto& p : profiles) {
    std::snprintf(buf, sizeof buf, "%s,%s,%.6f,%.6f,%.3f,%llu\n", p.model_id.c_str(),
                  score_kind_name(p.score_kind).c_str(), p.mu, p.sigma, p.delta,
                  static_cast<unsigned long long>(p.n));
    out << buf;
  }
  log.info("wrote profile store to " + out_path);
  return 0;
}

}  // namespace

int dispatch(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Behavioral-profile ensemble benchmark"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_help_all_flag("--help-all", "Print help for every subcommand");

  bool verbose = false;
  bool quiet = false;
  std::uint64_t seed = 1;
  app.add_flag("--verbose", verbose, "Log debug detail");
  app.add_flag("--quiet", quiet, "Log errors only");
  auto* seed_opt = app.add_option("--seed", seed, "Master seed (overrides the config value)");

  auto* run = app.add_subcommand("run", "Run a configured experiment");
  std::string run_config, run_out;
  int run_workers = 1;
  run->add_option("--config", run_config, "Experiment config file")->required();
  run->add_option("--out", run_out, "Output directory")->required();
  run->add_option("--workers", run_workers, "Parallel (dataset, seed) jobs")
      ->check(CLI::PositiveNumber);

  auto* sweep = app.add_subcommand("sweep", "Vary one hyperparameter over a configured grid");
  std::string sweep_config, sweep_axis, sweep_out;
  int sweep_workers = 1;
  sweep->add_option("--config", sweep_config, "Experiment config file")->required();
  sweep->add_option("--axis", sweep_axis, "One of: lambda, delta, alpha")->required();
  sweep->add_option("--out", sweep_out, "Output directory")->required();
  sweep->add_option("--workers", sweep_workers, "Parallel (dataset, seed) jobs")
      ->check(CLI::PositiveNumber);

  auto* report = app.add_subcommand("report", "Summarize a results file");
  std::string report_results, report_primary;
  report->add_option("--results", report_results, "results.csv produced by run")->required();
  report->add_option("--primary", report_primary,
                     "Method to compare against the rest (default: best average rank)");

  auto* verify = app.add_subcommand("verify-theory", "Run the randomized theory property suites");
  std::uint64_t trials = 1000;
  verify->add_option("--trials", trials, "Trial count per suite")->check(CLI::PositiveNumber);

  auto* profile = app.add_subcommand("profile", "Build and print behavioral profiles");
  std::string prof_dataset, prof_label, prof_out;
  double prof_delta = 0.5;
  std::string prof_score = "neg_entropy";
  int prof_bag = 0;
  profile->add_option("--dataset", prof_dataset, "CSV dataset path")->required();
  profile->add_option("--label", prof_label, "Label column name")->required();
  profile->add_option("--out", prof_out, "Profile store output path")->required();
  profile->add_option("--delta", prof_delta, "Perturbation scale");
  profile->add_option("--score", prof_score, "neg_entropy or top_margin");
  profile->add_option("--bag", prof_bag, "Use a bagged tree pool of this size instead");

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "[error] " << e.what() << '\n';
    return 1;
  }

  Logger log{&err, quiet ? 0 : verbose ? 2 : 1};
  try {
    if (app.got_subcommand(run))
      return cmd_run(run_config, run_out, run_workers, !seed_opt->empty(), seed, log);
    if (app.got_subcommand(sweep))
      return cmd_sweep(sweep_config, sweep_axis, sweep_out, sweep_workers, !seed_opt->empty(),
                       seed, log);
    if (app.got_subcommand(report)) return cmd_report(report_results, report_primary, out);
    if (app.got_subcommand(verify)) return cmd_verify_theory(seed, trials, out, log);
    if (app.got_subcommand(profile))
      return cmd_profile(prof_dataset, prof_label, prof_out, prof_delta, prof_score, prof_bag,
                         seed, out, log);
  } catch (const std::invalid_argument& e) {
    log.error(e.what());
    return 1;
  } catch (const std::exception& e) {
    log.error(e.what());
    return 2;
  }
  return 0;
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(std::move(args), std::cout, std::cerr);
}

}  // namespace bpe::cli
