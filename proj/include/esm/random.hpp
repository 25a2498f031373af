#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace esm {

// mt19937_64 with hand-mapped distributions so seeded draws are identical on
// every platform (std::normal_distribution and friends are
// implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Exact Poisson draw for any mean: sums of draws with mean <= 30, which
  /// keeps the Knuth product away from underflow.
  int poisson(double mean) {
    if (!(mean > 0.0)) return 0;
    int total = 0;
    while (mean > 30.0) {
      total += poisson_knuth(30.0);
      mean -= 30.0;
    }
    return total + poisson_knuth(mean);
  }

  /// Index in [0, p.size()) drawn with probabilities p (assumed to sum to 1).
  int categorical(const Eigen::VectorXd& p) {
    const double u = uniform();
    double acc = 0.0;
    for (int i = 0; i < p.size(); ++i) {
      acc += p[i];
      if (u < acc) return i;
    }
    return static_cast<int>(p.size()) - 1;
  }

  Eigen::VectorXd normal_vector(int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  /// Filled column by column.
  Eigen::MatrixXd normal_matrix(int rows, int cols) {
    Eigen::MatrixXd m(rows, cols);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) m(i, j) = normal();
    return m;
  }

 private:
  int poisson_knuth(double mean) {
    const double limit = std::exp(-mean);
    int count = 0;
    double prod = uniform();
    while (prod > limit) {
      ++count;
      prod *= uniform();
    }
    return count;
  }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace esm
