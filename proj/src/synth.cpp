#include "esm/synth.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "esm/random.hpp"
#include "esm/spectra.hpp"

namespace esm {

SynthResult synth_smooth(const WeightedGraph& graph, int basis_m, int n,
                         double records_per_node, BaseKind kind, std::uint64_t seed) {
  const int k = graph.num_vertices();
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (basis_m < 1 || basis_m > k)
    throw std::invalid_argument("basis_m must lie in [1, " + std::to_string(k) + "]");
  if (!(records_per_node >= 0.0))
    throw std::invalid_argument("records_per_node must be nonnegative");

  const EigenBasis basis = bottom_eigenbasis(graph, basis_m);
  Rng rng(seed);
  const Eigen::MatrixXd z_true =
      rng.normal_matrix(n, basis_m) / std::sqrt(static_cast<double>(basis_m));

  SynthResult result;
  result.theta_true = z_true * basis.q_tilde.transpose();
  result.data.schema = {kind, n, k};
  result.data.provenance = "synth(seed=" + std::to_string(seed) + ")";

  for (int node = 0; node < k; ++node) {
    const Eigen::VectorXd theta = result.theta_true.col(node);
    const Eigen::VectorXd probabilities =
        kind == BaseKind::DiscreteDistribution ? predict_distribution(theta) : Eigen::VectorXd();
    const int records = rng.poisson(records_per_node);
    for (int r = 0; r < records; ++r) {
      DataRecord record;
      record.z = node + 1;
      if (kind == BaseKind::Logistic) {
        record.x = rng.normal_vector(n);
        const double p = 1.0 / (1.0 + std::exp(-record.x.dot(theta)));
        record.y = rng.bernoulli(p) ? 1 : 0;
      } else {
        record.y = rng.categorical(probabilities) + 1;
      }
      result.data.records.push_back(std::move(record));
    }
  }
  result.data.splits.assign(result.data.records.size(), Split::Train);
  return result;
}

}  // namespace esm
