#pragma once

#include <vector>

#include "ebflow/baselines.hpp"
#include "ebflow/model.hpp"
#include "ebflow/seqnpmle.hpp"

namespace fixture {

using ebflow::GridPrior;
using ebflow::LinearModel;
using ebflow::MatrixXd;
using ebflow::VectorXd;

// One full Gibbs sweep on p = 2 as a K^2 x K^2 transition matrix, built from
// the library's coordinate conditionals.
inline MatrixXd sweep_kernel(const LinearModel& m, const GridPrior& g) {
  const int K = g.size();
  MatrixXd P = MatrixXd::Zero(K * K, K * K);
  for (int a = 0; a < K; ++a) {
    for (int b = 0; b < K; ++b) {
      ebflow::GibbsState s = ebflow::make_gibbs_state(m, g, {a, b});
      const VectorXd p0 = ebflow::gibbs_conditional(s, 0, g, m);
      for (int a2 = 0; a2 < K; ++a2) {
        ebflow::GibbsState s2 = ebflow::make_gibbs_state(m, g, {a2, b});
        const VectorXd p1 = ebflow::gibbs_conditional(s2, 1, g, m);
        for (int b2 = 0; b2 < K; ++b2) P(a + K * b, a2 + K * b2) += p0[a2] * p1[b2];
      }
    }
  }
  return P;
}

struct SeqInstance {
  std::vector<double> obs;
  double tau;
  std::vector<double> grid;
};

// Small sequence-model instances whose simplex can be scanned by brute force.
inline std::vector<SeqInstance> small_seq_instances() {
  return {
      {{-1.0, 1.0}, 1.0, {-1.0, 1.0}},
      {{-0.9, -0.1, 0.2, 1.1}, 0.5, {-1.0, 0.0, 1.0}},
      {{0.0, 0.0, 0.0, 0.0}, 0.1, {-1.0, 0.0, 1.0}},
      {{-2.1, -1.7, 0.3, 0.4, 0.6, 2.5}, 0.8, {-2.0, 0.0, 2.0}},
      {{0.05, 0.2, 0.9, 1.4, 1.6}, 0.3, {0.0, 1.5}},
  };
}

inline ebflow::SeqObjective to_objective(const SeqInstance& inst) {
  return ebflow::SeqObjective(Eigen::Map<const VectorXd>(inst.obs.data(), static_cast<Eigen::Index>(inst.obs.size())),
                              inst.tau,
                              Eigen::Map<const VectorXd>(inst.grid.data(), static_cast<Eigen::Index>(inst.grid.size())));
}

}  // namespace fixture
