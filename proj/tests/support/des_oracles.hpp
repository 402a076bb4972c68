#pragma once

// Naive re-implementations of the selector definitions, written directly from
// the contracts with no code shared with the library. Test-only.

#include <algorithm>
#include <cmath>
#include <vector>

#include "bpe/baselines.hpp"

namespace oracle {

inline std::size_t arg_max(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline std::vector<double> row_of(const bpe::Matrix& m, std::size_t i) {
  auto r = m.row(i);
  return {r.begin(), r.end()};
}

inline std::vector<double> normalize_clamped(std::vector<double> row) {
  double sum = 0.0;
  for (double& v : row) {
    if (v < 1e-15) v = 1e-15;
    if (v > 1.0) v = 1.0;
    sum += v;
  }
  for (double& v : row) v /= sum;
  return row;
}

inline std::vector<double> mean_rows(const bpe::baselines::Rows& rows,
                                     const std::vector<std::size_t>& members) {
  std::vector<double> out(rows[0].size(), 0.0);
  for (std::size_t m : members)
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += rows[m][c] / members.size();
  return normalize_clamped(out);
}

// exact k nearest by full sort, ties by index
inline bpe::baselines::RoC knn(const bpe::Matrix& x_ref, const std::vector<double>& x,
                               std::size_t k) {
  std::vector<std::pair<double, std::size_t>> d;
  for (std::size_t i = 0; i < x_ref.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < x_ref.cols(); ++j)
      s += (x[j] - x_ref(i, j)) * (x[j] - x_ref(i, j));
    d.push_back({std::sqrt(s), i});
  }
  std::sort(d.begin(), d.end());
  bpe::baselines::RoC roc;
  for (std::size_t i = 0; i < k; ++i) {
    roc.indices.push_back(d[i].second);
    roc.distances.push_back(d[i].first);
  }
  return roc;
}

inline std::vector<double> lca(const bpe::baselines::ReferenceSet& ref,
                               const bpe::baselines::RoC& roc,
                               const bpe::baselines::Rows& at_x) {
  std::vector<double> comp(at_x.size());
  for (std::size_t m = 0; m < at_x.size(); ++m) {
    std::size_t c = arg_max(at_x[m]);
    double num = 0, den = 0;
    for (std::size_t i : roc.indices) {
      if (arg_max(row_of(ref.predictions[m], i)) == c) {
        den += 1;
        if (static_cast<std::size_t>(ref.y[i]) == c) num += 1;
      }
    }
    comp[m] = den > 0 ? num / den : 0.0;
  }
  double best = *std::max_element(comp.begin(), comp.end());
  std::vector<std::size_t> sel;
  for (std::size_t m = 0; m < comp.size(); ++m)
    if (comp[m] == best) sel.push_back(m);
  return mean_rows(at_x, sel);
}

inline std::vector<double> knora_u(const bpe::baselines::ReferenceSet& ref,
                                   const bpe::baselines::RoC& roc,
                                   const bpe::baselines::Rows& at_x) {
  std::vector<double> votes(at_x.size(), 0.0);
  double total = 0.0;
  for (std::size_t m = 0; m < at_x.size(); ++m)
    for (std::size_t i : roc.indices)
      if (arg_max(row_of(ref.predictions[m], i)) == static_cast<std::size_t>(ref.y[i])) {
        votes[m] += 1;
        total += 1;
      }
  if (total == 0.0) {
    std::vector<std::size_t> all(at_x.size());
    for (std::size_t m = 0; m < all.size(); ++m) all[m] = m;
    return mean_rows(at_x, all);
  }
  std::vector<double> out(at_x[0].size(), 0.0);
  for (std::size_t m = 0; m < at_x.size(); ++m)
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += votes[m] / total * at_x[m][c];
  return normalize_clamped(out);
}

inline std::vector<double> knora_e(const bpe::baselines::ReferenceSet& ref,
                                   const bpe::baselines::RoC& roc,
                                   const bpe::baselines::Rows& at_x) {
  for (std::size_t k = roc.indices.size(); k >= 1; --k) {
    std::vector<std::size_t> sel;
    for (std::size_t m = 0; m < at_x.size(); ++m) {
      bool all = true;
      for (std::size_t i = 0; i < k; ++i) {
        std::size_t r = roc.indices[i];
        all = all && arg_max(row_of(ref.predictions[m], r)) == static_cast<std::size_t>(ref.y[r]);
      }
      if (all) sel.push_back(m);
    }
    if (!sel.empty()) return mean_rows(at_x, sel);
  }
  std::vector<std::size_t> all(at_x.size());
  for (std::size_t m = 0; m < all.size(); ++m) all[m] = m;
  return mean_rows(at_x, all);
}

inline std::vector<double> mcb(const bpe::baselines::ReferenceSet& ref,
                               const bpe::baselines::RoC& roc, const bpe::baselines::Rows& at_x,
                               double theta) {
  std::vector<std::size_t> profile(at_x.size());
  for (std::size_t m = 0; m < at_x.size(); ++m) profile[m] = arg_max(at_x[m]);

  std::vector<std::size_t> kept;
  for (std::size_t i : roc.indices) {
    double agree = 0;
    for (std::size_t m = 0; m < at_x.size(); ++m)
      if (arg_max(row_of(ref.predictions[m], i)) == profile[m]) agree += 1;
    if (agree / at_x.size() >= theta) kept.push_back(i);
  }
  if (kept.empty()) kept = roc.indices;

  std::vector<double> acc(at_x.size(), 0.0);
  for (std::size_t m = 0; m < at_x.size(); ++m) {
    for (std::size_t i : kept)
      if (arg_max(row_of(ref.predictions[m], i)) == static_cast<std::size_t>(ref.y[i]))
        acc[m] += 1;
    acc[m] /= kept.size();
  }
  double best = *std::max_element(acc.begin(), acc.end());
  std::vector<std::size_t> sel;
  for (std::size_t m = 0; m < acc.size(); ++m)
    if (acc[m] == best) sel.push_back(m);
  return mean_rows(at_x, sel);
}

inline std::vector<double> rrc(const bpe::baselines::ReferenceSet& ref,
                               const bpe::baselines::RoC& roc, const bpe::baselines::Rows& at_x) {
  double h = 0.0;
  for (double d : roc.distances) h += d / roc.distances.size();
  std::vector<double> comp(at_x.size(), 0.0);
  for (std::size_t m = 0; m < at_x.size(); ++m)
    for (std::size_t i = 0; i < roc.indices.size(); ++i) {
      std::size_t r = roc.indices[i];
      if (arg_max(row_of(ref.predictions[m], r)) == static_cast<std::size_t>(ref.y[r]))
        comp[m] += h == 0.0 ? 1.0
                            : std::exp(-roc.distances[i] * roc.distances[i] / (2.0 * h * h));
    }
  double total = 0.0;
  for (double v : comp) total += v;
  std::vector<double> out(at_x[0].size(), 0.0);
  if (total <= 0.0) {
    for (std::size_t m = 0; m < at_x.size(); ++m)
      for (std::size_t c = 0; c < out.size(); ++c) out[c] += at_x[m][c] / at_x.size();
  } else {
    for (std::size_t m = 0; m < at_x.size(); ++m)
      for (std::size_t c = 0; c < out.size(); ++c) out[c] += comp[m] / total * at_x[m][c];
  }
  return normalize_clamped(out);
}

inline std::vector<double> des_knn(const bpe::baselines::ReferenceSet& ref,
                                   const bpe::baselines::RoC& roc,
                                   const bpe::baselines::Rows& at_x, double p_a, double p_b,
                                   bpe::baselines::DiversityMeasure measure) {
  const std::size_t km = at_x.size();
  const std::size_t nk = roc.indices.size();

  std::vector<std::vector<bool>> ok(km, std::vector<bool>(nk));
  for (std::size_t m = 0; m < km; ++m)
    for (std::size_t i = 0; i < nk; ++i) {
      std::size_t r = roc.indices[i];
      ok[m][i] = arg_max(row_of(ref.predictions[m], r)) == static_cast<std::size_t>(ref.y[r]);
    }

  std::vector<double> acc(km, 0.0);
  for (std::size_t m = 0; m < km; ++m) {
    for (std::size_t i = 0; i < nk; ++i) acc[m] += ok[m][i] ? 1.0 : 0.0;
    acc[m] /= nk;
  }

  std::vector<double> div(km, 0.0);
  using bpe::baselines::DiversityMeasure;
  if (km >= 2) {
    for (std::size_t a = 0; a < km; ++a) {
      for (std::size_t b = 0; b < km; ++b) {
        if (a == b) continue;
        double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
        for (std::size_t i = 0; i < nk; ++i) {
          if (ok[a][i] && ok[b][i]) n11 += 1;
          if (ok[a][i] && !ok[b][i]) n10 += 1;
          if (!ok[a][i] && ok[b][i]) n01 += 1;
          if (!ok[a][i] && !ok[b][i]) n00 += 1;
        }
        double score;
        if (measure == DiversityMeasure::double_fault) {
          score = -(n00 / nk);
        } else if (measure == DiversityMeasure::q_statistic) {
          double den = n11 * n00 + n10 * n01;
          score = den == 0.0 ? -1.0 : -((n11 * n00 - n10 * n01) / den);
        } else {
          double err = n10 + n01 + n00;
          score = err == 0.0 ? -1.0 : -(n00 / err);
        }
        div[a] += score / (km - 1);
      }
    }
  }

  auto top = [&](const std::vector<double>& s, std::size_t count) {
    std::vector<std::size_t> order(km);
    for (std::size_t i = 0; i < km; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return s[x] > s[y]; });
    order.resize(std::min(count, km));
    return order;
  };
  auto na = static_cast<std::size_t>(std::ceil(p_a * km));
  auto nb = static_cast<std::size_t>(std::ceil(p_b * km));
  std::vector<std::size_t> committee = top(acc, na);
  for (std::size_t m : top(div, nb))
    if (std::find(committee.begin(), committee.end(), m) == committee.end())
      committee.push_back(m);
  return mean_rows(at_x, committee);
}

}  // namespace oracle
