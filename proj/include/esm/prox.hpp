#pragma once

#include <Eigen/Dense>

#include <span>
#include <variant>
#include <vector>

namespace esm {

enum class BaseKind { Logistic, DiscreteDistribution };

/// Logistic base model data for one stratification node: feature rows x and
/// binary labels y in {0,1}. The loss is sum_i log(1 + exp(-s_i x_i' theta))
/// with margins s_i = 2 y_i - 1.
struct LogisticLoss {
  Eigen::MatrixXd x;  // records x n; keep n columns even with zero records
  Eigen::VectorXd y;  // records
};

/// Non-parametric discrete distribution over n outcomes parameterized by
/// log-odds theta; counts are the sufficient statistic and the loss is
/// sum_y c_y (logsumexp(theta) - theta_y).
struct DiscreteLoss {
  Eigen::VectorXd counts;  // n, nonnegative
};

using LocalLossSpec = std::variant<LogisticLoss, DiscreteLoss>;

BaseKind loss_kind(const LocalLossSpec& spec);
int loss_dim(const LocalLossSpec& spec);
bool loss_empty(const LocalLossSpec& spec);

/// r(x) = gamma1/2 * sum x_i^2 + gamma2/2 * sum (x_{i+1} - x_i)^2, with the
/// last coordinate left out of the gamma1 term when intercept_exempt.
struct LocalRegularizerSpec {
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  bool intercept_exempt = false;
};

double loss_eval(const LocalLossSpec& spec, const Eigen::VectorXd& theta);
Eigen::VectorXd loss_gradient(const LocalLossSpec& spec, const Eigen::VectorXd& theta);
Eigen::MatrixXd loss_hessian(const LocalLossSpec& spec, const Eigen::VectorXd& theta);

double reg_eval(const LocalRegularizerSpec& reg, const Eigen::VectorXd& x);
Eigen::VectorXd reg_gradient(const LocalRegularizerSpec& reg, const Eigen::VectorXd& x);
Eigen::MatrixXd reg_hessian(const LocalRegularizerSpec& reg, int n);

/// argmin_theta loss(theta) + (1/2 rho) ||theta - v||^2, by damped Newton
/// with Armijo backtracking: gradient tolerance 1e-9, at most 100 steps,
/// else NumericalFailure with the final gradient norm. Empty data returns v.
Eigen::VectorXd prox_loss(const LocalLossSpec& spec, const Eigen::VectorXd& v, double rho);

/// argmin_x r(x) + (1/2 rho) ||x - v||^2, the tridiagonal solve
/// (gamma1 J + gamma2 D'D + I/rho) x = v/rho.
Eigen::VectorXd prox_reg(const LocalRegularizerSpec& reg, const Eigen::VectorXd& v, double rho);

/// Softmax with max subtraction; sums to one.
Eigen::VectorXd predict_distribution(const Eigen::VectorXd& theta);

/// argmin_theta sum_s loss_s(theta) + r(theta), the Newton solve behind the
/// separate and common fits. Starts at zero; same tolerance contract as
/// prox_loss.
Eigen::VectorXd minimize_regularized(std::span<const LocalLossSpec> losses,
                                     const LocalRegularizerSpec& reg, int n);

}  // namespace esm
