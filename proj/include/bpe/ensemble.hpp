#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bpe/learners.hpp"
#include "bpe/matrix.hpp"

namespace bpe {

enum class ScoreKind { neg_entropy, top_margin };

std::string score_kind_name(ScoreKind kind);
std::optional<ScoreKind> score_kind_from_name(std::string_view name);

// Confidence score of one probability row. neg_entropy is sum_c p ln p
// (0*ln 0 := 0, realized by flooring only the log argument); top_margin is
// the gap between the two largest entries. Higher means sharper.
double score(std::span<const double> p, ScoreKind kind);

// Mean and sample standard deviation (N-1 denominator).
std::pair<double, double> mean_and_sample_sd(std::span<const double> values);

// Per-model stress-test summary: the only state kept from profiling.
struct BehavioralProfile {
  std::string model_id;
  ScoreKind score_kind = ScoreKind::neg_entropy;
  double mu = 0.0;
  double sigma = 0.0;
  double delta = 0.0;
  std::uint64_t n = 0;
};

// Scores the model on a Gaussian-perturbed copy of x_train (already in the
// standardized feature space) and summarizes the score distribution.
BehavioralProfile build_profile(const learners::Classifier& model, std::string model_id,
                                const Matrix& x_train, double delta, std::uint64_t seed,
                                ScoreKind kind);

// One shared perturbed dataset for the whole pool.
std::vector<BehavioralProfile> build_profiles(const learners::TrainedPool& pool,
                                              const Matrix& x_train, double delta,
                                              std::uint64_t seed, ScoreKind kind);

// (s - mu) / (sigma + xi), clamped to [-clip, clip].
double z_score(double s_test, const BehavioralProfile& profile, double xi = 1e-12,
               double clip = 5.0);

struct WeightVector {
  std::vector<double> w;
  static WeightVector uniform(std::size_t k);
};

// exp(lambda * z_k) normalized, computed with max subtraction.
WeightVector softmax_weights(std::span<const double> z, double lambda);

enum class FuseMode { probability, borda_rank };

// Weighted per-row combination of the K model outputs. Probability mode
// renormalizes each fused row; borda_rank mode combines per-row descending
// ranks (best class scores C-1, ties share the mean of their positions).
Matrix fuse(const std::vector<Matrix>& outputs, const WeightVector& w,
            FuseMode mode = FuseMode::probability);

// Row kernel shared by fuse(), the static baselines and the BPE predictor so
// equal weights produce bit-identical results on every path.
void fuse_row_into(const std::vector<Matrix>& outputs, std::size_t row, std::span<const double> w,
                   std::span<double> out, FuseMode mode);
std::vector<double> borda_row(std::span<const double> p);

struct BpeParams {
  double lambda = 1.0;
  double delta = 0.5;
  double xi = 1e-12;
  double clip = 5.0;
  ScoreKind score_kind = ScoreKind::neg_entropy;
  FuseMode fuse_mode = FuseMode::probability;
};

// Phase-2 dynamic weighting: per test row, instantaneous scores on the raw
// inputs, z against each model's own profile, softmax weights, fused output.
Matrix bpe_predict(const learners::TrainedPool& pool,
                   const std::vector<BehavioralProfile>& profiles, const Matrix& x_test,
                   const BpeParams& params);

// Same, starting from precomputed per-model outputs on the test rows.
Matrix bpe_predict_from_outputs(const std::vector<Matrix>& outputs,
                                const std::vector<BehavioralProfile>& profiles,
                                const BpeParams& params);

// Profile store: CSV with fixed-width numeric fields (17 significant digits),
// so the file round-trips bit-exactly and its size depends only on the pool.
std::string profiles_to_csv(const std::vector<BehavioralProfile>& profiles);
std::vector<BehavioralProfile> profiles_from_csv(const std::string& text);
void save_profiles(const std::string& path, const std::vector<BehavioralProfile>& profiles);
std::vector<BehavioralProfile> load_profiles(const std::string& path);

}  // namespace bpe
