#include "esm/prox.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "esm/errors.hpp"

namespace esm {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kNewtonTol = 1e-9;
constexpr int kNewtonMaxIter = 100;
constexpr double kArmijoSlope = 1e-4;
constexpr double kBacktrackFactor = 0.5;
constexpr double kHessianRidge = 1e-10;

double softplus(double t) {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

double logsumexp(const VectorXd& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

void check_dim(const LocalLossSpec& spec, const VectorXd& theta) {
  if (theta.size() != loss_dim(spec))
    throw std::invalid_argument("theta has length " + std::to_string(theta.size()) +
                                " but the loss expects " + std::to_string(loss_dim(spec)));
}

// Damped Newton with Armijo backtracking on a smooth convex objective.
VectorXd newton_minimize(VectorXd theta, const std::function<double(const VectorXd&)>& value,
                         const std::function<VectorXd(const VectorXd&)>& gradient,
                         const std::function<MatrixXd(const VectorXd&)>& hessian,
                         const char* what) {
  double grad_norm = gradient(theta).norm();
  for (int iter = 0; iter < kNewtonMaxIter; ++iter) {
    const VectorXd g = gradient(theta);
    grad_norm = g.norm();
    if (grad_norm <= kNewtonTol) return theta;
    const MatrixXd h = hessian(theta);
    VectorXd direction = h.ldlt().solve(-g);
    double slope = g.dot(direction);
    if (!direction.allFinite() || slope >= 0.0) {
      direction = -g;
      slope = -g.squaredNorm();
    }
    const double f0 = value(theta);
    // Allowance for roundoff in the objective: near the optimum the true
    // decrease drops below evaluation noise and a strict Armijo test would
    // reject every step and stall short of the gradient tolerance.
    const double noise = 1e-12 * (std::abs(f0) + 1.0);
    double step = 1.0;
    while (step > 1e-14) {
      const VectorXd cand = theta + step * direction;
      const double f = value(cand);
      if (std::isfinite(f) && f <= f0 + kArmijoSlope * step * slope + noise) break;
      step *= kBacktrackFactor;
    }
    theta += step * direction;
  }
  grad_norm = gradient(theta).norm();
  if (grad_norm <= kNewtonTol) return theta;
  throw NumericalFailure(std::string(what) + ": Newton stopped after " +
                             std::to_string(kNewtonMaxIter) +
                             " iterations with gradient norm " + std::to_string(grad_norm),
                         grad_norm);
}

}  // namespace

BaseKind loss_kind(const LocalLossSpec& spec) {
  return std::holds_alternative<LogisticLoss>(spec) ? BaseKind::Logistic
                                                    : BaseKind::DiscreteDistribution;
}

int loss_dim(const LocalLossSpec& spec) {
  if (const auto* logistic = std::get_if<LogisticLoss>(&spec))
    return static_cast<int>(logistic->x.cols());
  return static_cast<int>(std::get<DiscreteLoss>(spec).counts.size());
}

bool loss_empty(const LocalLossSpec& spec) {
  if (const auto* logistic = std::get_if<LogisticLoss>(&spec)) return logistic->x.rows() == 0;
  return std::get<DiscreteLoss>(spec).counts.sum() == 0.0;
}

double loss_eval(const LocalLossSpec& spec, const VectorXd& theta) {
  check_dim(spec, theta);
  if (const auto* logistic = std::get_if<LogisticLoss>(&spec)) {
    const VectorXd margins = logistic->x * theta;
    double total = 0.0;
    for (int i = 0; i < margins.size(); ++i) {
      const double s = 2.0 * logistic->y[i] - 1.0;
      total += softplus(-s * margins[i]);
    }
    return total;
  }
  const auto& discrete = std::get<DiscreteLoss>(spec);
  const double mass = discrete.counts.sum();
  if (mass == 0.0) return 0.0;
  return mass * logsumexp(theta) - discrete.counts.dot(theta);
}

VectorXd loss_gradient(const LocalLossSpec& spec, const VectorXd& theta) {
  check_dim(spec, theta);
  if (const auto* logistic = std::get_if<LogisticLoss>(&spec)) {
    VectorXd g = VectorXd::Zero(theta.size());
    const VectorXd margins = logistic->x * theta;
    for (int i = 0; i < margins.size(); ++i) {
      const double s = 2.0 * logistic->y[i] - 1.0;
      const double sig = 1.0 / (1.0 + std::exp(s * margins[i]));  // sigma(-s m)
      g -= s * sig * logistic->x.row(i).transpose();
    }
    return g;
  }
  const auto& discrete = std::get<DiscreteLoss>(spec);
  const double mass = discrete.counts.sum();
  if (mass == 0.0) return VectorXd::Zero(theta.size());
  return mass * predict_distribution(theta) - discrete.counts;
}

MatrixXd loss_hessian(const LocalLossSpec& spec, const VectorXd& theta) {
  check_dim(spec, theta);
  const int n = static_cast<int>(theta.size());
  if (const auto* logistic = std::get_if<LogisticLoss>(&spec)) {
    MatrixXd h = MatrixXd::Zero(n, n);
    const VectorXd margins = logistic->x * theta;
    for (int i = 0; i < margins.size(); ++i) {
      const double sig = 1.0 / (1.0 + std::exp(-margins[i]));
      const double w = sig * (1.0 - sig);  // label-free curvature
      h.noalias() += w * logistic->x.row(i).transpose() * logistic->x.row(i);
    }
    return h;
  }
  const auto& discrete = std::get<DiscreteLoss>(spec);
  const double mass = discrete.counts.sum();
  if (mass == 0.0) return MatrixXd::Zero(n, n);
  const VectorXd p = predict_distribution(theta);
  MatrixXd h = -mass * p * p.transpose();
  h.diagonal() += mass * p;
  return h;
}

double reg_eval(const LocalRegularizerSpec& reg, const VectorXd& x) {
  const int n = static_cast<int>(x.size());
  double sq = x.squaredNorm();
  if (reg.intercept_exempt && n > 0) sq -= x[n - 1] * x[n - 1];
  double diff = 0.0;
  for (int i = 0; i + 1 < n; ++i) {
    const double d = x[i + 1] - x[i];
    diff += d * d;
  }
  return 0.5 * reg.gamma1 * sq + 0.5 * reg.gamma2 * diff;
}

VectorXd reg_gradient(const LocalRegularizerSpec& reg, const VectorXd& x) {
  const int n = static_cast<int>(x.size());
  VectorXd g = reg.gamma1 * x;
  if (reg.intercept_exempt && n > 0) g[n - 1] = 0.0;
  for (int i = 0; i + 1 < n; ++i) {
    const double d = reg.gamma2 * (x[i + 1] - x[i]);
    g[i] -= d;
    g[i + 1] += d;
  }
  return g;
}

MatrixXd reg_hessian(const LocalRegularizerSpec& reg, int n) {
  MatrixXd h = MatrixXd::Zero(n, n);
  h.diagonal().setConstant(reg.gamma1);
  if (reg.intercept_exempt && n > 0) h(n - 1, n - 1) = 0.0;
  for (int i = 0; i + 1 < n; ++i) {
    h(i, i) += reg.gamma2;
    h(i + 1, i + 1) += reg.gamma2;
    h(i, i + 1) -= reg.gamma2;
    h(i + 1, i) -= reg.gamma2;
  }
  return h;
}

VectorXd prox_loss(const LocalLossSpec& spec, const VectorXd& v, double rho) {
  check_dim(spec, v);
  if (!(rho > 0.0)) throw std::invalid_argument("rho must be positive");
  if (loss_empty(spec)) return v;
  const bool discrete = loss_kind(spec) == BaseKind::DiscreteDistribution;
  const double inv_rho = 1.0 / rho;
  auto value = [&](const VectorXd& t) {
    return loss_eval(spec, t) + 0.5 * inv_rho * (t - v).squaredNorm();
  };
  auto gradient = [&](const VectorXd& t) {
    return VectorXd(loss_gradient(spec, t) + inv_rho * (t - v));
  };
  auto hessian = [&](const VectorXd& t) {
    MatrixXd h = loss_hessian(spec, t);
    h.diagonal().array() += inv_rho + (discrete ? kHessianRidge : 0.0);
    return h;
  };
  return newton_minimize(v, value, gradient, hessian, "prox_loss");
}

VectorXd prox_reg(const LocalRegularizerSpec& reg, const VectorXd& v, double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("rho must be positive");
  const int n = static_cast<int>(v.size());
  if (n == 0) return v;
  // Tridiagonal system (gamma1 J + gamma2 D'D + I/rho) x = v/rho, solved by
  // the Thomas algorithm; diagonal dominance makes it stable without
  // pivoting.
  VectorXd diag(n), upper(std::max(0, n - 1));
  const double inv_rho = 1.0 / rho;
  for (int i = 0; i < n; ++i) {
    double d = reg.gamma1 + inv_rho;
    if (reg.intercept_exempt && i == n - 1) d = inv_rho;
    if (n > 1) d += (i == 0 || i == n - 1) ? reg.gamma2 : 2.0 * reg.gamma2;
    diag[i] = d;
  }
  upper.setConstant(-reg.gamma2);
  VectorXd x = v * inv_rho;
  VectorXd scratch(std::max(0, n - 1));
  double pivot = diag[0];
  x[0] /= pivot;
  for (int i = 1; i < n; ++i) {
    scratch[i - 1] = upper[i - 1] / pivot;
    pivot = diag[i] - upper[i - 1] * scratch[i - 1];
    x[i] = (x[i] - upper[i - 1] * x[i - 1]) / pivot;
  }
  for (int i = n - 2; i >= 0; --i) x[i] -= scratch[i] * x[i + 1];
  return x;
}

VectorXd predict_distribution(const VectorXd& theta) {
  if (theta.size() == 0) throw std::invalid_argument("empty parameter vector");
  VectorXd p = (theta.array() - theta.maxCoeff()).exp();
  p /= p.sum();
  return p;
}

VectorXd minimize_regularized(std::span<const LocalLossSpec> losses,
                              const LocalRegularizerSpec& reg, int n) {
  for (const LocalLossSpec& spec : losses)
    if (loss_dim(spec) != n)
      throw std::invalid_argument("loss dimension mismatch in minimize_regularized");
  auto value = [&](const VectorXd& t) {
    double total = reg_eval(reg, t);
    for (const LocalLossSpec& spec : losses) total += loss_eval(spec, t);
    return total;
  };
  auto gradient = [&](const VectorXd& t) {
    VectorXd g = reg_gradient(reg, t);
    for (const LocalLossSpec& spec : losses) g += loss_gradient(spec, t);
    return g;
  };
  auto hessian = [&](const VectorXd& t) {
    MatrixXd h = reg_hessian(reg, n);
    for (const LocalLossSpec& spec : losses) h += loss_hessian(spec, t);
    h.diagonal().array() += kHessianRidge;
    return h;
  };
  return newton_minimize(VectorXd::Zero(n), value, gradient, hessian, "minimize_regularized");
}

}  // namespace esm
