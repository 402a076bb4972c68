#pragma once

// Random micro-instances for selector/oracle comparisons. Test-only.

#include <vector>

#include "bpe/baselines.hpp"
#include "bpe/rng.hpp"

namespace testsupport {

struct MicroInstance {
  bpe::baselines::ReferenceSet ref;
  bpe::baselines::RoC roc;
  bpe::baselines::Rows at_x;
  std::size_t k = 1;
};

inline std::vector<double> random_row(bpe::rng::Stream& s, std::size_t c) {
  std::vector<double> row(c);
  double sum = 0.0;
  for (double& v : row) {
    v = 0.05 + s.next_double();
    sum += v;
  }
  for (double& v : row) v /= sum;
  return row;
}

inline MicroInstance random_micro_instance(bpe::rng::Stream& s) {
  const std::size_t n_ref = 3 + s.next_below(10);  // 3..12
  const std::size_t k_models = 1 + s.next_below(3);
  const std::size_t c = 2 + s.next_below(2);
  const std::size_t d = 1 + s.next_below(3);

  bpe::Matrix x(n_ref, d);
  for (double& v : x.data()) v = 4.0 * s.next_double() - 2.0;
  std::vector<int> y(n_ref);
  for (auto& v : y) v = static_cast<int>(s.next_below(c));

  std::vector<bpe::Matrix> predictions(k_models, bpe::Matrix(n_ref, c));
  for (auto& m : predictions)
    for (std::size_t i = 0; i < n_ref; ++i) {
      auto row = random_row(s, c);
      std::copy(row.begin(), row.end(), m.row(i).begin());
    }

  MicroInstance inst;
  inst.ref = bpe::baselines::make_reference(std::move(x), std::move(y), std::move(predictions));
  inst.k = 1 + s.next_below(std::min<std::size_t>(5, n_ref));

  std::vector<double> query(d);
  for (double& v : query) v = 4.0 * s.next_double() - 2.0;
  inst.roc = bpe::baselines::knn_query(inst.ref.x, query, inst.k);

  inst.at_x.resize(k_models);
  for (auto& row : inst.at_x) row = random_row(s, c);
  return inst;
}

}  // namespace testsupport
