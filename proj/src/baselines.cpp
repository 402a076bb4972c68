#include "bpe/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bpe::baselines {

namespace {

std::vector<double> average_of(const Rows& outputs_at_x, const std::vector<std::size_t>& members) {
  std::vector<double> out(outputs_at_x[0].size(), 0.0);
  for (std::size_t k : members)
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += outputs_at_x[k][c];
  for (double& v : out) v /= static_cast<double>(members.size());
  clamp_renormalize_row(out);
  return out;
}

std::vector<double> weighted_row(const Rows& outputs_at_x, std::span<const double> w) {
  std::vector<double> out(outputs_at_x[0].size(), 0.0);
  for (std::size_t k = 0; k < outputs_at_x.size(); ++k)
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += w[k] * outputs_at_x[k][c];
  clamp_renormalize_row(out);
  return out;
}

std::vector<std::size_t> all_models(std::size_t k) {
  std::vector<std::size_t> v(k);
  for (std::size_t i = 0; i < k; ++i) v[i] = i;
  return v;
}

}  // namespace

ReferenceSet make_reference(Matrix x, std::vector<int> y, std::vector<Matrix> predictions) {
  ReferenceSet ref;
  ref.x = std::move(x);
  ref.y = std::move(y);
  ref.predictions = std::move(predictions);
  ref.correct.resize(ref.predictions.size());
  for (std::size_t k = 0; k < ref.predictions.size(); ++k) {
    const Matrix& pred = ref.predictions[k];
    if (pred.rows() != ref.y.size())
      throw std::invalid_argument("reference predictions do not match reference rows");
    ref.correct[k].resize(pred.rows());
    for (std::size_t i = 0; i < pred.rows(); ++i)
      ref.correct[k][i] = argmax_row(pred.row(i)) == static_cast<std::size_t>(ref.y[i]);
  }
  return ref;
}

RoC knn_query(const Matrix& x_ref, std::span<const double> x, std::size_t k) {
  if (k == 0 || k > x_ref.rows())
    throw std::invalid_argument("knn_query: k must be in [1, reference size]");
  std::vector<std::pair<double, std::size_t>> dist(x_ref.rows());
  for (std::size_t i = 0; i < x_ref.rows(); ++i) {
    double s = 0.0;
    auto r = x_ref.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      double d = x[j] - r[j];
      s += d * d;
    }
    dist[i] = {s, i};
  }
  std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
  RoC roc;
  roc.indices.resize(k);
  roc.distances.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    roc.indices[i] = dist[i].second;
    roc.distances[i] = std::sqrt(dist[i].first);
  }
  return roc;
}

std::size_t single_best(const learners::TrainedPool& pool) {
  if (!pool.screening_acc) throw std::invalid_argument("single_best: no screening accuracies");
  const auto& acc = *pool.screening_acc;
  std::size_t best = 0;
  for (std::size_t k = 1; k < acc.size(); ++k)
    if (acc[k] > acc[best]) best = k;
  return best;
}

Matrix simple_average(const std::vector<Matrix>& outputs) {
  return fuse(outputs, WeightVector::uniform(outputs.size()), FuseMode::probability);
}

Matrix median_average(const std::vector<Matrix>& outputs) {
  if (outputs.empty()) throw std::invalid_argument("median_average: no model outputs");
  const std::size_t rows = outputs[0].rows();
  const std::size_t cols = outputs[0].cols();
  Matrix out(rows, cols);
  std::vector<double> vals(outputs.size());
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t c = 0; c < cols; ++c) {
      for (std::size_t k = 0; k < outputs.size(); ++k) vals[k] = outputs[k](i, c);
      std::sort(vals.begin(), vals.end());
      std::size_t m = vals.size() / 2;
      out(i, c) = vals.size() % 2 ? vals[m] : (vals[m - 1] + vals[m]) / 2.0;
    }
    clamp_renormalize_row(out.row(i));
  }
  return out;
}

Matrix weighted_average(const std::vector<Matrix>& outputs, std::span<const double> ref_acc) {
  if (outputs.size() != ref_acc.size())
    throw std::invalid_argument("weighted_average: accuracy count mismatch");
  double sum = 0.0;
  for (double a : ref_acc) sum += a;
  WeightVector w;
  if (sum <= 0.0) {
    w = WeightVector::uniform(outputs.size());
  } else {
    w.w.resize(ref_acc.size());
    for (std::size_t k = 0; k < ref_acc.size(); ++k) w.w[k] = ref_acc[k] / sum;
  }
  return fuse(outputs, w, FuseMode::probability);
}

std::vector<double> lca_select(const ReferenceSet& ref, const RoC& roc, const Rows& outputs_at_x) {
  if (roc.size() == 0) throw std::invalid_argument("lca_select: empty region of competence");
  const std::size_t k_models = outputs_at_x.size();
  std::vector<double> competence(k_models, 0.0);
  for (std::size_t k = 0; k < k_models; ++k) {
    auto predicted = argmax_row(outputs_at_x[k]);
    std::size_t assigned = 0, correct = 0;
    for (std::size_t i : roc.indices) {
      if (argmax_row(ref.predictions[k].row(i)) != predicted) continue;
      ++assigned;
      if (static_cast<std::size_t>(ref.y[i]) == predicted) ++correct;
    }
    competence[k] = assigned == 0 ? 0.0
                                  : static_cast<double>(correct) / static_cast<double>(assigned);
  }
  double best = *std::max_element(competence.begin(), competence.end());
  std::vector<std::size_t> tied;
  for (std::size_t k = 0; k < k_models; ++k)
    if (competence[k] == best) tied.push_back(k);
  return average_of(outputs_at_x, tied);
}

std::vector<double> knora_union(const ReferenceSet& ref, const RoC& roc, const Rows& outputs_at_x) {
  if (roc.size() == 0) throw std::invalid_argument("knora_union: empty region of competence");
  const std::size_t k_models = outputs_at_x.size();
  std::vector<double> votes(k_models, 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < k_models; ++k) {
    for (std::size_t i : roc.indices) votes[k] += ref.correct[k][i] ? 1.0 : 0.0;
    total += votes[k];
  }
  if (total == 0.0) return average_of(outputs_at_x, all_models(k_models));
  for (double& v : votes) v /= total;
  return weighted_row(outputs_at_x, votes);
}

std::vector<double> knora_eliminate(const ReferenceSet& ref, const RoC& roc_max,
                                    const Rows& outputs_at_x) {
  if (roc_max.size() == 0) throw std::invalid_argument("knora_eliminate: empty region");
  const std::size_t k_models = outputs_at_x.size();
  for (std::size_t k = roc_max.size(); k >= 1; --k) {
    std::vector<std::size_t> eligible;
    for (std::size_t m = 0; m < k_models; ++m) {
      bool all_correct = true;
      for (std::size_t i = 0; i < k && all_correct; ++i)
        all_correct = ref.correct[m][roc_max.indices[i]];
      if (all_correct) eligible.push_back(m);
    }
    if (!eligible.empty()) return average_of(outputs_at_x, eligible);
  }
  return average_of(outputs_at_x, all_models(k_models));
}

std::vector<double> mcb_select(const ReferenceSet& ref, const RoC& roc, const Rows& outputs_at_x,
                               double theta) {
  if (roc.size() == 0) throw std::invalid_argument("mcb_select: empty region of competence");
  const std::size_t k_models = outputs_at_x.size();
  std::vector<std::size_t> profile(k_models);
  for (std::size_t k = 0; k < k_models; ++k) profile[k] = argmax_row(outputs_at_x[k]);

  // Keep neighbors whose output profile agrees with x's on >= theta of models.
  std::vector<std::size_t> kept;
  for (std::size_t i : roc.indices) {
    std::size_t agree = 0;
    for (std::size_t k = 0; k < k_models; ++k)
      if (argmax_row(ref.predictions[k].row(i)) == profile[k]) ++agree;
    if (static_cast<double>(agree) / static_cast<double>(k_models) >= theta) kept.push_back(i);
  }
  if (kept.empty()) kept.assign(roc.indices.begin(), roc.indices.end());

  std::vector<double> acc(k_models, 0.0);
  for (std::size_t k = 0; k < k_models; ++k) {
    for (std::size_t i : kept) acc[k] += ref.correct[k][i] ? 1.0 : 0.0;
    acc[k] /= static_cast<double>(kept.size());
  }
  double best = *std::max_element(acc.begin(), acc.end());
  std::vector<std::size_t> tied;
  for (std::size_t k = 0; k < k_models; ++k)
    if (acc[k] == best) tied.push_back(k);
  return average_of(outputs_at_x, tied);
}

WeightVector rrc_weights(const ReferenceSet& ref, const RoC& roc) {
  if (roc.size() == 0) throw std::invalid_argument("rrc_weights: empty region of competence");
  double h = 0.0;
  for (double d : roc.distances) h += d;
  h /= static_cast<double>(roc.size());

  const std::size_t k_models = ref.n_models();
  std::vector<double> competence(k_models, 0.0);
  for (std::size_t k = 0; k < k_models; ++k) {
    for (std::size_t i = 0; i < roc.size(); ++i) {
      if (!ref.correct[k][roc.indices[i]]) continue;
      double d = roc.distances[i];
      competence[k] += h == 0.0 ? 1.0 : std::exp(-d * d / (2.0 * h * h));
    }
  }
  double total = 0.0;
  for (double v : competence) total += v;
  WeightVector w;
  if (total <= 0.0) {
    w = WeightVector::uniform(k_models);
  } else {
    w.w.resize(k_models);
    for (std::size_t k = 0; k < k_models; ++k) w.w[k] = competence[k] / total;
  }
  return w;
}

std::vector<double> rrc_fuse(const ReferenceSet& ref, const RoC& roc, const Rows& outputs_at_x) {
  WeightVector w = rrc_weights(ref, roc);
  return weighted_row(outputs_at_x, w.w);
}

std::vector<double> des_knn_diversity(const ReferenceSet& ref, const RoC& roc,
                                      DiversityMeasure measure) {
  const std::size_t k_models = ref.n_models();
  const double least_diverse = -1.0;  // all measures are negated into [-1, 0]-ish scores

  auto pairwise = [&](std::size_t a, std::size_t b) {
    double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
    for (std::size_t i : roc.indices) {
      bool ca = ref.correct[a][i], cb = ref.correct[b][i];
      if (ca && cb)
        ++n11;
      else if (ca && !cb)
        ++n10;
      else if (!ca && cb)
        ++n01;
      else
        ++n00;
    }
    double total = n11 + n10 + n01 + n00;
    switch (measure) {
      case DiversityMeasure::double_fault:
        return -(n00 / total);
      case DiversityMeasure::q_statistic: {
        double den = n11 * n00 + n10 * n01;
        if (den == 0.0) return least_diverse;
        return -((n11 * n00 - n10 * n01) / den);
      }
      case DiversityMeasure::ratio_of_errors: {
        double errors = n10 + n01 + n00;
        if (errors == 0.0) return least_diverse;
        return -(n00 / errors);
      }
    }
    return least_diverse;
  };

  std::vector<double> diversity(k_models, 0.0);
  if (k_models < 2) return diversity;
  for (std::size_t a = 0; a < k_models; ++a) {
    double sum = 0.0;
    for (std::size_t b = 0; b < k_models; ++b)
      if (a != b) sum += pairwise(a, b);
    diversity[a] = sum / static_cast<double>(k_models - 1);
  }
  return diversity;
}

std::vector<std::size_t> des_knn_committee(const ReferenceSet& ref, const RoC& roc, double p_a,
                                           double p_b, DiversityMeasure measure) {
  if (roc.size() == 0) throw std::invalid_argument("des_knn: empty region of competence");
  if (!(p_a > 0.0 && p_a <= 1.0) || !(p_b > 0.0 && p_b <= 1.0))
    throw std::invalid_argument("des_knn: p_a and p_b must be in (0, 1]");
  const std::size_t k_models = ref.n_models();

  std::vector<double> acc(k_models, 0.0);
  for (std::size_t k = 0; k < k_models; ++k) {
    for (std::size_t i : roc.indices) acc[k] += ref.correct[k][i] ? 1.0 : 0.0;
    acc[k] /= static_cast<double>(roc.size());
  }
  std::vector<double> diversity = des_knn_diversity(ref, roc, measure);

  auto top_by = [&](const std::vector<double>& scores, std::size_t count) {
    std::vector<std::size_t> order(k_models);
    for (std::size_t i = 0; i < k_models; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    order.resize(std::min(count, k_models));
    return order;
  };

  auto n_acc = static_cast<std::size_t>(
      std::ceil(p_a * static_cast<double>(k_models)));
  auto n_div = static_cast<std::size_t>(
      std::ceil(p_b * static_cast<double>(k_models)));
  std::vector<std::size_t> committee = top_by(acc, n_acc);
  for (std::size_t k : top_by(diversity, n_div))
    if (std::find(committee.begin(), committee.end(), k) == committee.end())
      committee.push_back(k);
  std::sort(committee.begin(), committee.end());
  return committee;
}

std::vector<double> des_knn(const ReferenceSet& ref, const RoC& roc, const Rows& outputs_at_x,
                            double p_a, double p_b, DiversityMeasure measure) {
  return average_of(outputs_at_x, des_knn_committee(ref, roc, p_a, p_b, measure));
}

}  // namespace bpe::baselines
