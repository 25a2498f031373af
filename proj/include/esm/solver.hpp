#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "esm/graph.hpp"
#include "esm/model.hpp"
#include "esm/prox.hpp"
#include "esm/spectra.hpp"

namespace esm {

/// Exact solves the consensus block of the splitting (the proximal step sees
/// both copies of theta-tilde); SingleCopy keeps only the eigenbasis copy.
/// Both are exposed because they behave differently per iteration even
/// though they aim at the same problem.
enum class ThetaTildeUpdate { Exact, SingleCopy };

struct FitConfig {
  double rho = 1.0;
  int max_iter = 1000;
  double abs_tol = 1e-6;
  double rel_tol = 1e-4;
  std::optional<int> m;  // absent: use all K eigenvectors
  ThetaTildeUpdate update = ThetaTildeUpdate::Exact;
  std::uint64_t seed = 0;  // reserved for randomized starts; fits start at zero
  int threads = 1;         // <= 0: all hardware threads
};

struct IterationRecord {
  int iteration = 0;
  double r1 = 0.0;             // ||theta - theta_tilde||_F
  double r2 = 0.0;             // ||theta_tilde - Z Qt^T||_F
  double dual_residual = 0.0;  // ||(theta_tilde - previous) / rho||_F
  double objective = 0.0;      // constrained objective at the current Z
};

struct FitDiagnostics {
  std::vector<IterationRecord> iterations;
  bool converged = false;
  double final_r1 = 0.0;
  double final_r2 = 0.0;
  double epsilon = 0.0;  // primal threshold at the last iteration
};

/// Exact minimizer of (1/2)||Z diag(lambda)^(1/2)||^2 +
/// (1/2 rho)||theta_tilde - Z Qt^T + u_tilde||^2:
/// Z = (1/rho)(u_tilde + theta_tilde) Qt (diag(lambda) + I/rho)^(-1).
Eigen::MatrixXd z_update(const Eigen::MatrixXd& theta_tilde, const Eigen::MatrixXd& u_tilde,
                         const EigenBasis& basis, double rho);

struct FitResult {
  StratParams params;
  FitDiagnostics diagnostics;
};

/// ADMM fit of the eigen-constrained stratified model. Losses are indexed
/// by graph vertex; per-node proximal steps run in parallel with results
/// independent of the worker count. Stops when both primal residuals fall
/// below sqrt(nK)*abs_tol + rel_tol*max(||theta||, ||theta_tilde||, ||Z Qt^T||).
FitResult fit_eigen_stratified(const std::vector<LocalLossSpec>& losses,
                               const LocalRegularizerSpec& reg, const WeightedGraph& graph,
                               const FitConfig& config);

/// K independent Newton fits of loss_k + r; no coupling across nodes.
StratParams fit_separate(const std::vector<LocalLossSpec>& losses,
                         const LocalRegularizerSpec& reg, int num_nodes,
                         const FitConfig& config);

/// One Newton fit of sum_k loss_k + r (the regularizer counted once),
/// replicated across all K columns.
StratParams fit_common(const std::vector<LocalLossSpec>& losses, const LocalRegularizerSpec& reg,
                       int num_nodes, const FitConfig& config);

/// sum_k [loss_k + r](theta_k) + (1/2) tr(theta L theta^T).
double stratified_objective(const std::vector<LocalLossSpec>& losses,
                            const LocalRegularizerSpec& reg, const Eigen::MatrixXd& theta,
                            const Eigen::MatrixXd& laplacian);

void write_diagnostics_csv(const FitDiagnostics& diagnostics, const std::string& path);

}  // namespace esm
