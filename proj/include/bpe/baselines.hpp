#pragma once

#include <span>
#include <vector>

#include "bpe/ensemble.hpp"
#include "bpe/learners.hpp"
#include "bpe/matrix.hpp"

namespace bpe::baselines {

// Reference rows, labels and per-model reference predictions used by the
// DCS/DES competitors. Immutable after construction.
struct ReferenceSet {
  Matrix x;
  std::vector<int> y;
  std::vector<Matrix> predictions;          // one N_ref x C matrix per model
  std::vector<std::vector<char>> correct;   // per-model correctness masks

  std::size_t size() const { return x.rows(); }
  std::size_t n_models() const { return predictions.size(); }
};

ReferenceSet make_reference(Matrix x, std::vector<int> y, std::vector<Matrix> predictions);

// Region of competence: k nearest reference rows, ascending distance, ties
// broken by lower index.
struct RoC {
  std::vector<std::size_t> indices;
  std::vector<double> distances;
  std::size_t size() const { return indices.size(); }
};

RoC knn_query(const Matrix& x_ref, std::span<const double> x, std::size_t k);

// Per-model probability rows at one test point.
using Rows = std::vector<std::vector<double>>;

// Index of the highest screening accuracy; ties go to the lower pool index.
std::size_t single_best(const learners::TrainedPool& pool);

Matrix simple_average(const std::vector<Matrix>& outputs);
Matrix median_average(const std::vector<Matrix>& outputs);
Matrix weighted_average(const std::vector<Matrix>& outputs, std::span<const double> ref_acc);

// Local class accuracy: hard-selects the most competent model for the class
// it predicts at x; tied models are averaged.
std::vector<double> lca_select(const ReferenceSet& ref, const RoC& roc, const Rows& outputs_at_x);

std::vector<double> knora_union(const ReferenceSet& ref, const RoC& roc, const Rows& outputs_at_x);

// Decrements k from roc_max.size() until some model is correct on all k
// nearest neighbors; falls back to the plain average when none is.
std::vector<double> knora_eliminate(const ReferenceSet& ref, const RoC& roc_max,
                                    const Rows& outputs_at_x);

std::vector<double> mcb_select(const ReferenceSet& ref, const RoC& roc, const Rows& outputs_at_x,
                               double theta = 0.7);

// Gaussian-potential competences over neighbor distances; bandwidth is the
// mean RoC distance.
WeightVector rrc_weights(const ReferenceSet& ref, const RoC& roc);
std::vector<double> rrc_fuse(const ReferenceSet& ref, const RoC& roc, const Rows& outputs_at_x);

enum class DiversityMeasure { double_fault, q_statistic, ratio_of_errors };

// Mean pairwise diversity of each model against the rest on the RoC, oriented
// so larger means more diverse; degenerate denominators map to least-diverse.
std::vector<double> des_knn_diversity(const ReferenceSet& ref, const RoC& roc,
                                      DiversityMeasure measure);

// Committee: top ceil(p_a*K) by local accuracy united with top ceil(p_b*K) by
// diversity (duplicates removed), then a plain average over the committee.
std::vector<std::size_t> des_knn_committee(const ReferenceSet& ref, const RoC& roc, double p_a,
                                           double p_b, DiversityMeasure measure);
std::vector<double> des_knn(const ReferenceSet& ref, const RoC& roc, const Rows& outputs_at_x,
                            double p_a = 0.5, double p_b = 0.3,
                            DiversityMeasure measure = DiversityMeasure::double_fault);

}  // namespace bpe::baselines
