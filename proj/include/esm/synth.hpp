#pragma once

#include <Eigen/Dense>

#include <cstdint>

#include "esm/dataset.hpp"
#include "esm/graph.hpp"

namespace esm {

struct SynthResult {
  Dataset data;
  Eigen::MatrixXd theta_true;  // n x K
};

/// Synthetic data whose ground truth varies smoothly over the graph:
/// theta* = Z* Qt^T with Z* drawn i.i.d. N(0, 1/basis_m) against the bottom
/// basis_m eigenvectors. Each node gets Poisson(records_per_node) records;
/// logistic features are standard normal with Bernoulli labels, discrete
/// outcomes are drawn from the node's distribution.
SynthResult synth_smooth(const WeightedGraph& graph, int basis_m, int n,
                         double records_per_node, BaseKind kind, std::uint64_t seed);

}  // namespace esm
