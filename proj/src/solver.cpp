#include "esm/solver.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

#include "esm/errors.hpp"
#include "esm/graph_spec.hpp"
#include "esm/parallel.hpp"

namespace esm {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

int common_loss_dim(const std::vector<LocalLossSpec>& losses) {
  if (losses.empty()) throw std::invalid_argument("no losses given");
  const int n = loss_dim(losses.front());
  if (n < 1) throw std::invalid_argument("losses must have dimension >= 1");
  for (const LocalLossSpec& spec : losses)
    if (loss_dim(spec) != n || loss_kind(spec) != loss_kind(losses.front()))
      throw std::invalid_argument("losses disagree on dimension or base kind");
  return n;
}

std::vector<std::pair<std::string, double>> hyper_table(const LocalRegularizerSpec& reg,
                                                        const FitConfig& config, int m) {
  return {{"gamma1", reg.gamma1},
          {"gamma2", reg.gamma2},
          {"intercept_exempt", reg.intercept_exempt ? 1.0 : 0.0},
          {"rho", config.rho},
          {"m", static_cast<double>(m)}};
}

}  // namespace

MatrixXd z_update(const MatrixXd& theta_tilde, const MatrixXd& u_tilde, const EigenBasis& basis,
                  double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("rho must be positive");
  if (theta_tilde.rows() != u_tilde.rows() || theta_tilde.cols() != u_tilde.cols())
    throw std::invalid_argument("theta_tilde and u_tilde have different shapes");
  if (theta_tilde.cols() != basis.num_vertices())
    throw std::invalid_argument("state has " + std::to_string(theta_tilde.cols()) +
                                " columns but the basis covers " +
                                std::to_string(basis.num_vertices()) + " vertices");
  const VectorXd scale =
      ((basis.lambda_m.array() + 1.0 / rho).inverse() / rho).matrix();
  return ((u_tilde + theta_tilde) * basis.q_tilde) * scale.asDiagonal();
}

FitResult fit_eigen_stratified(const std::vector<LocalLossSpec>& losses,
                               const LocalRegularizerSpec& reg, const WeightedGraph& graph,
                               const FitConfig& config) {
  const int k = graph.num_vertices();
  if (static_cast<int>(losses.size()) != k)
    throw std::invalid_argument("got " + std::to_string(losses.size()) + " losses for " +
                                std::to_string(k) + " graph vertices");
  const int n = common_loss_dim(losses);
  const int m = config.m.value_or(k);
  if (m < 1 || m > k)
    throw std::invalid_argument("m = " + std::to_string(m) + " must lie in [1, " +
                                std::to_string(k) + "]");
  if (!(config.rho > 0.0)) throw std::invalid_argument("rho must be positive");
  if (config.max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");

  const EigenBasis basis = bottom_eigenbasis(graph, m);
  const double rho = config.rho;

  MatrixXd theta = MatrixXd::Zero(n, k);
  MatrixXd theta_tilde = MatrixXd::Zero(n, k);
  MatrixXd u = MatrixXd::Zero(n, k);
  MatrixXd u_tilde = MatrixXd::Zero(n, k);
  MatrixXd z = MatrixXd::Zero(n, m);
  MatrixXd w = MatrixXd::Zero(n, k);  // Z Qt^T
  MatrixXd previous_tilde(n, k);

  FitDiagnostics diagnostics;
  diagnostics.iterations.reserve(static_cast<std::size_t>(config.max_iter));
  double epsilon = 0.0;

  for (int iter = 1; iter <= config.max_iter; ++iter) {
    // Per-node proximal step on the losses; Z sees only the previous
    // theta_tilde and u_tilde, so the two updates commute.
    parallel_for(k, config.threads, [&](int node) {
      try {
        theta.col(node) = prox_loss(losses[static_cast<std::size_t>(node)],
                                    theta_tilde.col(node) - u.col(node), rho);
      } catch (const NumericalFailure& failure) {
        throw NumericalFailure("theta update failed at node " + std::to_string(node + 1) + ": " +
                                   failure.what(),
                               failure.residual());
      }
    });
    z = z_update(theta_tilde, u_tilde, basis, rho);
    w.noalias() = z * basis.q_tilde.transpose();

    previous_tilde.swap(theta_tilde);
    if (config.update == ThetaTildeUpdate::Exact) {
      // Exact block minimizer: the two quadratic pulls average, which halves
      // the proximal weight.
      const MatrixXd target = 0.5 * (theta + u + w - u_tilde);
      parallel_for(k, config.threads, [&](int node) {
        theta_tilde.col(node) = prox_reg(reg, target.col(node), 0.5 * rho);
      });
    } else {
      const MatrixXd target = w - u_tilde;
      parallel_for(k, config.threads, [&](int node) {
        theta_tilde.col(node) = prox_reg(reg, target.col(node), rho);
      });
    }

    u += theta - theta_tilde;
    u_tilde += theta_tilde - w;

    IterationRecord record;
    record.iteration = iter;
    record.r1 = (theta - theta_tilde).norm();
    record.r2 = (theta_tilde - w).norm();
    record.dual_residual = (theta_tilde - previous_tilde).norm() / rho;
    double objective = factored_dirichlet_energy(z, basis.lambda_m);
    for (int node = 0; node < k; ++node)
      objective += loss_eval(losses[static_cast<std::size_t>(node)], w.col(node)) +
                   reg_eval(reg, w.col(node));
    record.objective = objective;
    diagnostics.iterations.push_back(record);

    epsilon = std::sqrt(static_cast<double>(n) * k) * config.abs_tol +
              config.rel_tol * std::max({theta.norm(), theta_tilde.norm(), w.norm()});
    if (record.r1 <= epsilon && record.r2 <= epsilon) {
      diagnostics.converged = true;
      break;
    }
  }

  const IterationRecord& last = diagnostics.iterations.back();
  diagnostics.final_r1 = last.r1;
  diagnostics.final_r2 = last.r2;
  diagnostics.epsilon = epsilon;

  FitResult result;
  result.params.base_kind = loss_kind(losses.front());
  result.params.n = n;
  result.params.k = k;
  result.params.factorized = true;
  result.params.z = z;
  result.params.basis = basis;
  result.params.graph_spec = graph_spec_string(graph);
  result.params.hyper = hyper_table(reg, config, m);
  result.params.report = {diagnostics.converged, last.iteration, last.r1, last.r2};
  result.diagnostics = std::move(diagnostics);
  return result;
}

StratParams fit_separate(const std::vector<LocalLossSpec>& losses,
                         const LocalRegularizerSpec& reg, int num_nodes,
                         const FitConfig& config) {
  if (static_cast<int>(losses.size()) != num_nodes)
    throw std::invalid_argument("got " + std::to_string(losses.size()) + " losses for " +
                                std::to_string(num_nodes) + " nodes");
  const int n = common_loss_dim(losses);
  StratParams params;
  params.base_kind = loss_kind(losses.front());
  params.n = n;
  params.k = num_nodes;
  params.theta.resize(n, num_nodes);
  parallel_for(num_nodes, config.threads, [&](int node) {
    try {
      params.theta.col(node) =
          minimize_regularized({&losses[static_cast<std::size_t>(node)], 1}, reg, n);
    } catch (const NumericalFailure& failure) {
      throw NumericalFailure("separate fit failed at node " + std::to_string(node + 1) + ": " +
                                 failure.what(),
                             failure.residual());
    }
  });
  params.hyper = {{"gamma1", reg.gamma1},
                  {"gamma2", reg.gamma2},
                  {"intercept_exempt", reg.intercept_exempt ? 1.0 : 0.0}};
  return params;
}

StratParams fit_common(const std::vector<LocalLossSpec>& losses, const LocalRegularizerSpec& reg,
                       int num_nodes, const FitConfig& config) {
  (void)config;
  if (static_cast<int>(losses.size()) != num_nodes)
    throw std::invalid_argument("got " + std::to_string(losses.size()) + " losses for " +
                                std::to_string(num_nodes) + " nodes");
  const int n = common_loss_dim(losses);
  const VectorXd fitted = minimize_regularized({losses.data(), losses.size()}, reg, n);
  StratParams params;
  params.base_kind = loss_kind(losses.front());
  params.n = n;
  params.k = num_nodes;
  params.theta = fitted.replicate(1, num_nodes);
  params.hyper = {{"gamma1", reg.gamma1},
                  {"gamma2", reg.gamma2},
                  {"intercept_exempt", reg.intercept_exempt ? 1.0 : 0.0}};
  return params;
}

double stratified_objective(const std::vector<LocalLossSpec>& losses,
                            const LocalRegularizerSpec& reg, const Eigen::MatrixXd& theta,
                            const Eigen::MatrixXd& laplacian) {
  if (static_cast<int>(losses.size()) != theta.cols())
    throw std::invalid_argument("losses and theta disagree on the node count");
  double total = dirichlet_energy(theta, laplacian);
  for (int node = 0; node < theta.cols(); ++node)
    total += loss_eval(losses[static_cast<std::size_t>(node)], theta.col(node)) +
             reg_eval(reg, theta.col(node));
  return total;
}

void write_diagnostics_csv(const FitDiagnostics& diagnostics, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out << "iteration,r1,r2,dual_residual,objective\n";
  char buf[32];
  for (const IterationRecord& record : diagnostics.iterations) {
    out << record.iteration;
    const double values[4] = {record.r1, record.r2, record.dual_residual, record.objective};
    for (double v : values) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw FormatError("failed writing " + path);
}

}  // namespace esm
