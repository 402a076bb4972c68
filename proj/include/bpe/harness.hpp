#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bpe/baselines.hpp"
#include "bpe/data.hpp"
#include "bpe/ensemble.hpp"
#include "bpe/learners.hpp"
#include "bpe/stats.hpp"

namespace bpe::harness {

struct DatasetRef {
  std::string path;
  std::string label_column;
  std::string id;  // filename stem unless set explicitly
};

enum class Method {
  single_best,
  simple_average,
  median_average,
  weighted_average,
  lca,
  mcb,
  knora_union,
  knora_eliminate,
  rrc,
  des_knn_df,
  des_knn_q,
  des_knn_re,
  bpe,             // score kind taken from the config
  bpe_entropy,
  bpe_top_margin,
  bpe_entropy_rank,
};

std::string method_name(Method m);
std::optional<Method> method_from_name(std::string_view name);
bool method_needs_reference(Method m);
bool method_needs_profiles(Method m);

struct PoolSpec {
  std::vector<learners::LearnerSpec> members;  // heterogeneous list
  bool bagged = false;                         // homogeneous bag of members[0]
  int bag_size = 40;
};

PoolSpec default_pool();

enum class ReferenceMode { oof, fixed_split };

struct ExperimentConfig {
  std::vector<DatasetRef> datasets;
  std::vector<Method> methods;
  PoolSpec pool = default_pool();
  double alpha = 0.15;       // screening tolerance
  int folds = 5;             // reference folds
  int seeds = 50;            // sequential repeats from master_seed
  std::uint64_t master_seed = 0;
  double lambda = 1.0;
  double delta = 0.5;
  double xi = 1e-12;
  double clip = 5.0;
  ScoreKind score_kind = ScoreKind::neg_entropy;
  int roc_k = 7;
  double test_fraction = 0.25;
  ReferenceMode reference_mode = ReferenceMode::oof;
  bool record_timings = false;  // timings are written as 0 unless enabled
  std::vector<double> sweep_lambda;
  std::vector<double> sweep_delta;
  std::vector<double> sweep_alpha;

  void validate() const;  // throws std::invalid_argument naming the field
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config(const std::string& path);

struct ResultRecord {
  std::string dataset;
  std::string method;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double fit_seconds = 0.0;
  double predict_seconds = 0.0;
  int pool_size = 0;
};

// Raised when one (dataset, seed) job fails; carries the context.
struct JobError : std::runtime_error {
  JobError(const std::string& dataset, std::uint64_t seed, const std::string& what)
      : std::runtime_error("dataset " + dataset + ", seed " + std::to_string(seed) + ": " + what),
        dataset(dataset),
        seed(seed) {}
  std::string dataset;
  std::uint64_t seed;
};

// Indices meeting acc >= max(acc) * (1 - alpha), in pool order.
std::vector<std::size_t> screen_retained(std::span<const double> accs, double alpha);

struct PoolMember {
  learners::LearnerSpec spec;
  std::string id;
  bool bootstrap = false;
  int member_index = 0;
};

std::vector<PoolMember> expand_pool(const PoolSpec& spec);

learners::ClassifierPtr fit_member(const PoolMember& member, const Matrix& x,
                                   const std::vector<int>& y, int n_classes,
                                   std::uint64_t phase_seed);

// 80/20 screening split, threshold selection, then full-data refits of the
// retained members. screening_acc holds the 20%-split accuracies.
learners::TrainedPool screen(const PoolSpec& spec, const Matrix& x, const std::vector<int>& y,
                             int n_classes, double alpha, std::uint64_t seed,
                             std::vector<PoolMember>* retained_out = nullptr);

// Stratified fold labels in [0, folds); folds == n is leave-one-out.
std::vector<int> stratified_fold_assignment(const std::vector<int>& y, int folds,
                                            std::uint64_t seed);

struct OofReference {
  baselines::ReferenceSet ref;
  std::vector<int> fold_of;  // fold whose held-out model predicted each row
};

// Out-of-fold reference over the full training set: every row is predicted by
// the member variant fitted without that row's fold.
OofReference build_oof_reference(const std::vector<PoolMember>& members, const Matrix& x,
                                 const std::vector<int>& y, int n_classes, int folds,
                                 std::uint64_t seed);

// Cheaper protocol: 75/25 split, reference rows are the held-out quarter.
baselines::ReferenceSet build_fixed_split_reference(const std::vector<PoolMember>& members,
                                                    const Matrix& x, const std::vector<int>& y,
                                                    int n_classes, std::uint64_t seed);

std::vector<ResultRecord> run_experiment(const ExperimentConfig& config, int workers = 1);

// In-memory variant used by tests and the synthetic benchmark: datasets are
// already encoded and standardized.
std::vector<ResultRecord> run_experiment_on(const ExperimentConfig& config,
                                            const std::vector<data::Dataset>& datasets,
                                            const std::vector<std::string>& ids, int workers = 1);

enum class SweepAxis { lambda, delta, alpha };
std::optional<SweepAxis> sweep_axis_from_name(std::string_view name);

struct SweepResult {
  SweepAxis axis = SweepAxis::lambda;
  std::vector<std::pair<double, std::vector<ResultRecord>>> runs;
};

SweepResult sweep(const ExperimentConfig& config, SweepAxis axis, int workers = 1);

std::string results_to_csv(const std::vector<ResultRecord>& records);
void write_results_csv(const std::string& path, const std::vector<ResultRecord>& records);
std::vector<ResultRecord> read_results_csv(const std::string& path);

// Mean accuracy per (dataset, method); names sorted ascending.
stats::ResultsMatrix results_matrix(const std::vector<ResultRecord>& records);

// Accuracy table, average ranks, pairwise signed-rank tests and win-tie-loss
// counts of `primary` against every other method.
std::string format_report(const std::vector<ResultRecord>& records,
                          const std::string& primary = "");

inline constexpr std::size_t kDownsampleMax = 10000;

}  // namespace bpe::harness
