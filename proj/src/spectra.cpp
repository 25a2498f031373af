#include "esm/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "esm/errors.hpp"

namespace esm {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

Spectrum dense_spectrum_of(const MatrixXd& l) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(l);
  if (es.info() != Eigen::Success)
    throw NumericalFailure("dense eigensolver did not converge", 0.0);
  return {es.eigenvalues(), es.eigenvectors()};
}

Spectrum dense_spectrum(const WeightedGraph& g) { return dense_spectrum_of(laplacian(g)); }

/// Orthonormal basis of vectors supported on `count` contiguous vertices
/// starting at `start` that sum to zero there: count-1 columns, column j
/// puts 1/sqrt(j(j+1)) on the first j support vertices and -j/sqrt(j(j+1))
/// on the next one.
MatrixXd zero_sum_basis(int k, int start, int count) {
  MatrixXd basis = MatrixXd::Zero(k, std::max(0, count - 1));
  for (int j = 1; j < count; ++j) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(j) * (j + 1));
    for (int v = 0; v < j; ++v) basis(start + v, j - 1) = scale;
    basis(start + j, j - 1) = -j * scale;
  }
  return basis;
}

Spectrum path_spectrum(int k, double w) {
  Spectrum s;
  s.eigenvalues.resize(k);
  s.eigenvectors.resize(k, k);
  const double pi = std::numbers::pi;
  for (int mode = 0; mode < k; ++mode) {
    s.eigenvalues[mode] = w * (2.0 - 2.0 * std::cos(pi * mode / k));
    for (int v = 0; v < k; ++v)
      s.eigenvectors(v, mode) = std::cos(pi * mode * (v + 0.5) / k);
    s.eigenvectors.col(mode).normalize();
  }
  return s;
}

Spectrum cycle_spectrum(int k, double w) {
  Spectrum s;
  s.eigenvalues.resize(k);
  s.eigenvectors.resize(k, k);
  const double pi = std::numbers::pi;
  s.eigenvalues[0] = 0.0;
  s.eigenvectors.col(0).setOnes();
  s.eigenvectors.col(0).normalize();
  int idx = 1;
  for (int mode = 1; 2 * mode <= k; ++mode) {
    const double value = w * (2.0 - 2.0 * std::cos(2.0 * pi * mode / k));
    s.eigenvalues[idx] = value;
    for (int v = 0; v < k; ++v) s.eigenvectors(v, idx) = std::cos(2.0 * pi * mode * v / k);
    s.eigenvectors.col(idx).normalize();
    ++idx;
    if (2 * mode == k) break;  // the sine branch vanishes at the half mode
    s.eigenvalues[idx] = value;
    for (int v = 0; v < k; ++v) s.eigenvectors(v, idx) = std::sin(2.0 * pi * mode * v / k);
    s.eigenvectors.col(idx).normalize();
    ++idx;
  }
  return s;
}

Spectrum star_spectrum(int k, double w) {
  Spectrum s;
  s.eigenvalues.resize(k);
  s.eigenvectors.resize(k, k);
  s.eigenvalues[0] = 0.0;
  s.eigenvectors.col(0).setConstant(1.0 / std::sqrt(static_cast<double>(k)));
  s.eigenvalues.segment(1, k - 2).setConstant(w);
  s.eigenvectors.middleCols(1, k - 2) = zero_sum_basis(k, 1, k - 1);
  s.eigenvalues[k - 1] = w * k;
  VectorXd top(k);
  top[0] = k - 1;
  top.tail(k - 1).setConstant(-1.0);
  s.eigenvectors.col(k - 1) = top.normalized();
  return s;
}

// Closed-form eigenvalues (hub + ring structure); eigenvectors delegated to
// the dense solver, which pairs with the values because both are ascending.
Spectrum wheel_spectrum(const WeightedGraph& g) {
  const int k = g.num_vertices();
  const double w = g.family_weight();
  const int ring = k - 1;
  std::vector<double> values;
  values.reserve(k);
  values.push_back(0.0);
  for (int mode = 1; 2 * mode <= ring; ++mode) {
    const double value = w * (3.0 - 2.0 * std::cos(2.0 * std::numbers::pi * mode / ring));
    values.push_back(value);
    if (2 * mode != ring) values.push_back(value);
  }
  values.push_back(w * k);
  std::sort(values.begin(), values.end());
  Spectrum s = dense_spectrum(g);
  for (int i = 0; i < k; ++i) s.eigenvalues[i] = values[static_cast<std::size_t>(i)];
  return s;
}

Spectrum complete_spectrum(int k, double w) {
  Spectrum s;
  s.eigenvalues.resize(k);
  s.eigenvectors.resize(k, k);
  s.eigenvalues[0] = 0.0;
  s.eigenvalues.tail(k - 1).setConstant(w * k);
  s.eigenvectors.col(0).setConstant(1.0 / std::sqrt(static_cast<double>(k)));
  s.eigenvectors.rightCols(k - 1) = zero_sum_basis(k, 0, k);
  return s;
}

Spectrum bipartite_spectrum(int alpha, int beta, double w) {
  const int k = alpha + beta;
  Spectrum s;
  s.eigenvalues.resize(k);
  s.eigenvectors.resize(k, k);
  int idx = 0;
  s.eigenvalues[idx] = 0.0;
  s.eigenvectors.col(idx).setConstant(1.0 / std::sqrt(static_cast<double>(k)));
  ++idx;
  // w*alpha on zero-sum vectors over the beta part, then w*beta over the
  // alpha part; alpha <= beta keeps this ascending.
  if (beta > 1) {
    s.eigenvalues.segment(idx, beta - 1).setConstant(w * alpha);
    s.eigenvectors.middleCols(idx, beta - 1) = zero_sum_basis(k, alpha, beta);
    idx += beta - 1;
  }
  if (alpha > 1) {
    s.eigenvalues.segment(idx, alpha - 1).setConstant(w * beta);
    s.eigenvectors.middleCols(idx, alpha - 1) = zero_sum_basis(k, 0, alpha);
    idx += alpha - 1;
  }
  s.eigenvalues[idx] = w * k;
  VectorXd top(k);
  top.head(alpha).setConstant(-static_cast<double>(beta));
  top.tail(beta).setConstant(static_cast<double>(alpha));
  s.eigenvectors.col(idx) = top / std::sqrt(static_cast<double>(alpha) * beta * k);
  return s;
}

Spectrum analytic_spectrum(const WeightedGraph& g) {
  switch (g.family()) {
    case GraphFamily::Path:
      return path_spectrum(g.num_vertices(), g.family_weight());
    case GraphFamily::Cycle:
      return cycle_spectrum(g.num_vertices(), g.family_weight());
    case GraphFamily::Star:
      return star_spectrum(g.num_vertices(), g.family_weight());
    case GraphFamily::Wheel:
      return wheel_spectrum(g);
    case GraphFamily::Complete:
      return complete_spectrum(g.num_vertices(), g.family_weight());
    case GraphFamily::CompleteBipartite:
      return bipartite_spectrum(g.bipartite_alpha(), g.bipartite_beta(), g.family_weight());
    case GraphFamily::Scaled: {
      Spectrum s = analytic_spectrum(g.inner());
      s.eigenvalues *= g.scale_factor();
      return s;
    }
    case GraphFamily::Product: {
      const Spectrum left = analytic_spectrum(g.left());
      const Spectrum right = analytic_spectrum(g.right());
      const int ka = static_cast<int>(left.eigenvalues.size());
      const int kb = static_cast<int>(right.eigenvalues.size());
      // Pairs enumerated lexicographically; the stable sort keeps that order
      // within ties.
      std::vector<std::tuple<double, int, int>> pairs;
      pairs.reserve(static_cast<std::size_t>(ka) * kb);
      for (int i = 0; i < ka; ++i)
        for (int j = 0; j < kb; ++j)
          pairs.emplace_back(left.eigenvalues[i] + right.eigenvalues[j], i, j);
      std::stable_sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
        return std::get<0>(a) < std::get<0>(b);
      });
      Spectrum s;
      s.eigenvalues.resize(ka * kb);
      s.eigenvectors.resize(ka * kb, ka * kb);
      for (int c = 0; c < ka * kb; ++c) {
        const auto& [value, i, j] = pairs[static_cast<std::size_t>(c)];
        s.eigenvalues[c] = value;
        for (int vi = 0; vi < ka; ++vi)
          s.eigenvectors.col(c).segment(vi * kb, kb) =
              left.eigenvectors(vi, i) * right.eigenvectors.col(j);
      }
      return s;
    }
    case GraphFamily::Custom:
      break;
  }
  throw UnsupportedStructure("no closed-form spectrum for a custom graph");
}

/// Shift-invert Lanczos with full reorthogonalization and deflated restarts.
///
/// Bottom eigenvalues of a Laplacian are typically clustered, which makes
/// plain Lanczos hopeless in a small step budget; running the iteration on
/// (A - sigma I)^{-1} with sigma just below the spectrum turns them into
/// well separated dominant eigenvalues. Converged eigenvectors are deflated
/// and fresh sequences probe the orthogonal complement until the bottom-m
/// set is certified: a sequence whose smallest converged value does not
/// undercut the current m-th value proves nothing smaller is left. Repeated
/// eigenvalues need this, since one Krylov sequence sees each eigenspace
/// only once.
EigenBasis lanczos_impl(const MatrixXd& matrix, int m, double tol) {
  const int k = static_cast<int>(matrix.rows());
  std::mt19937_64 engine(0x9e3779b97f4a7c15ULL);
  auto uniform_entry = [&] {
    return static_cast<double>(engine() >> 11) * 0x1.0p-53 - 0.5;
  };

  if (k == 1) {
    EigenBasis basis;
    basis.q_tilde = MatrixXd::Ones(1, 1);
    basis.lambda_m = VectorXd::Constant(1, matrix(0, 0));
    return basis;
  }

  // Bracket the spectrum with a short plain pass. Ritz values interlace, so
  // the smallest one bounds lambda_min from above; a small margin below it
  // gives a positive definite shift, verified by the factorization itself.
  double e_min, e_max;
  {
    const int probe = std::min(k, std::max(20, 2 * m));
    MatrixXd v(k, probe);
    VectorXd alpha(probe), beta(probe);
    VectorXd start(k);
    for (int i = 0; i < k; ++i) start[i] = uniform_entry();
    v.col(0) = start.normalized();
    int steps = 0;
    for (int j = 0; j < probe; ++j) {
      VectorXd w = matrix * v.col(j);
      alpha[j] = v.col(j).dot(w);
      w -= v.leftCols(j + 1) * (v.leftCols(j + 1).transpose() * w);
      w -= v.leftCols(j + 1) * (v.leftCols(j + 1).transpose() * w);
      steps = j + 1;
      const double b = w.norm();
      if (b < 1e-12 || j + 1 == probe) break;
      beta[j] = b;
      v.col(j + 1) = w / b;
    }
    MatrixXd t = MatrixXd::Zero(steps, steps);
    t.diagonal() = alpha.head(steps);
    if (steps > 1) {
      t.diagonal(1) = beta.head(steps - 1);
      t.diagonal(-1) = beta.head(steps - 1);
    }
    const Eigen::SelfAdjointEigenSolver<MatrixXd> tri(t);
    e_min = tri.eigenvalues()[0];
    e_max = tri.eigenvalues()[steps - 1];
  }

  const double spread = std::max(e_max - e_min, 1e-8 * std::max(1.0, std::abs(e_max)));
  double margin = 1e-3 * spread;
  Eigen::LLT<MatrixXd> llt;
  double sigma = 0.0;
  for (int attempt = 0;; ++attempt) {
    sigma = e_min - margin;
    llt.compute(matrix - sigma * MatrixXd::Identity(k, k));
    if (llt.info() == Eigen::Success) break;
    if (attempt > 60)
      throw NumericalFailure("could not find a positive definite shift for Lanczos", 0.0);
    margin *= 8.0;
  }

  struct Converged {
    double value;
    VectorXd vector;
  };
  std::vector<Converged> pool;  // ascending by value
  MatrixXd deflate(k, 0);
  const int budget = std::min(10 * m, k);
  const int max_sequences = m + 6;
  double best_missed = std::numeric_limits<double>::infinity();

  for (int seq = 0; seq < max_sequences && static_cast<int>(pool.size()) < k; ++seq) {
    const int used = static_cast<int>(pool.size());
    const int steps_cap = std::min(budget, k - used);
    MatrixXd v(k, steps_cap);
    VectorXd alpha(steps_cap), beta(steps_cap);

    auto project_out = [&](VectorXd& w, int cols) {
      if (used > 0) w -= deflate * (deflate.transpose() * w);
      if (cols > 0) w -= v.leftCols(cols) * (v.leftCols(cols).transpose() * w);
    };

    VectorXd start(k);
    for (;;) {
      for (int i = 0; i < k; ++i) start[i] = uniform_entry();
      project_out(start, 0);
      project_out(start, 0);
      if (start.norm() > 1e-8) break;
    }
    v.col(0) = start.normalized();

    int steps = 0;
    for (int j = 0; j < steps_cap; ++j) {
      VectorXd w = llt.solve(v.col(j));
      alpha[j] = v.col(j).dot(w);
      w -= alpha[j] * v.col(j);
      if (j > 0) w -= beta[j - 1] * v.col(j - 1);
      project_out(w, j + 1);
      project_out(w, j + 1);
      steps = j + 1;
      const double b = w.norm();
      if (b < 1e-12) break;  // invariant subspace exhausted
      if (j + 1 == steps_cap) break;
      beta[j] = b;
      v.col(j + 1) = w / b;
    }

    MatrixXd t = MatrixXd::Zero(steps, steps);
    t.diagonal() = alpha.head(steps);
    if (steps > 1) {
      t.diagonal(1) = beta.head(steps - 1);
      t.diagonal(-1) = beta.head(steps - 1);
    }
    const Eigen::SelfAdjointEigenSolver<MatrixXd> tri(t);

    // The sequence's smallest Ritz value estimates the minimum of A over
    // the deflated complement; the largest mu maps to it.
    const double mu_top = tri.eigenvalues()[steps - 1];
    const double probe_min =
        mu_top > 0.0 ? sigma + 1.0 / mu_top : std::numeric_limits<double>::infinity();

    // Largest Ritz values of the inverted operator are the smallest
    // eigenvalues of A; each candidate is verified by its true residual.
    std::vector<Converged> newly;
    for (int r = steps - 1; r >= 0; --r) {
      VectorXd y = v.leftCols(steps) * tri.eigenvectors().col(r);
      if (used > 0) y -= deflate * (deflate.transpose() * y);
      const double norm = y.norm();
      if (norm < 0.5) continue;
      y /= norm;
      const double value = y.dot(matrix * y);
      const double residual = (matrix * y - value * y).norm();
      if (residual <= tol)
        newly.push_back({value, std::move(y)});
      else
        best_missed = std::min(best_missed, residual);
    }

    deflate.conservativeResize(k, used + static_cast<int>(newly.size()));
    for (std::size_t i = 0; i < newly.size(); ++i)
      deflate.col(used + static_cast<int>(i)) = newly[i].vector;
    const bool progressed = !newly.empty();
    for (Converged& c : newly) pool.push_back(std::move(c));
    std::sort(pool.begin(), pool.end(),
              [](const Converged& a, const Converged& b) { return a.value < b.value; });

    if (static_cast<int>(pool.size()) >= m) {
      // Certified once a sequence confined to the complement of the pool
      // finds nothing below the current m-th value. Converged pairs are not
      // required there: an unconverged Ritz estimate only overstates the
      // complement minimum, which errs toward running another sequence.
      const double cut = pool[m - 1].value;
      const double slack = 1e-9 * std::max(1.0, std::abs(cut));
      if (probe_min >= cut - slack || static_cast<int>(pool.size()) >= k) {
        EigenBasis basis;
        basis.lambda_m.resize(m);
        basis.q_tilde.resize(k, m);
        for (int i = 0; i < m; ++i) {
          basis.lambda_m[i] = pool[i].value;
          basis.q_tilde.col(i) = pool[i].vector;
        }
        return basis;
      }
    }

    if (!progressed)
      throw NumericalFailure(
          "Lanczos did not reach tolerance " + std::to_string(tol) + " within " +
              std::to_string(steps) + " steps; residual " + std::to_string(best_missed),
          best_missed);
  }
  throw NumericalFailure("Lanczos restarts exhausted before the bottom " + std::to_string(m) +
                             " eigenpairs were certified; best residual " +
                             std::to_string(best_missed),
                         best_missed);
}

Spectrum take_backend(const WeightedGraph& g, SpectrumBackend backend) {
  switch (backend) {
    case SpectrumBackend::Analytic:
      return analytic_spectrum(g);
    case SpectrumBackend::Dense:
      return dense_spectrum(g);
    case SpectrumBackend::Lanczos: {
      const EigenBasis full = lanczos_bottom(laplacian(g), g.num_vertices());
      return {full.lambda_m, full.q_tilde};
    }
    case SpectrumBackend::Auto:
      if (has_analytic_spectrum(g)) return analytic_spectrum(g);
      if (g.num_vertices() <= kDenseBackendMaxVertices) return dense_spectrum(g);
      return take_backend(g, SpectrumBackend::Lanczos);
  }
  throw std::invalid_argument("unknown spectrum backend");
}

}  // namespace

Spectrum compute_spectrum(const WeightedGraph& g, SpectrumBackend backend) {
  return take_backend(g, backend);
}

EigenBasis bottom_eigenbasis(const WeightedGraph& g, int m, SpectrumBackend backend) {
  const int k = g.num_vertices();
  if (m < 1 || m > k)
    throw std::invalid_argument("basis size m = " + std::to_string(m) +
                                " must lie in [1, " + std::to_string(k) + "]");
  if (backend == SpectrumBackend::Lanczos ||
      (backend == SpectrumBackend::Auto && !has_analytic_spectrum(g) &&
       k > kDenseBackendMaxVertices))
    return lanczos_bottom(laplacian(g), m);
  const Spectrum s = compute_spectrum(g, backend);
  EigenBasis basis;
  basis.q_tilde = s.eigenvectors.leftCols(m);
  basis.lambda_m = s.eigenvalues.head(m);
  return basis;
}

EigenBasis lanczos_bottom(const Eigen::MatrixXd& matrix, int m, double tol) {
  if (matrix.rows() != matrix.cols()) throw std::invalid_argument("matrix must be square");
  if (m < 1 || m > matrix.rows())
    throw std::invalid_argument("basis size m out of range for Lanczos");
  return lanczos_impl(matrix, m, tol);
}

double dirichlet_energy(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& l) {
  if (l.rows() != l.cols()) throw std::invalid_argument("Laplacian must be square");
  if (theta.cols() != l.rows())
    throw std::invalid_argument("theta has " + std::to_string(theta.cols()) +
                                " columns but the Laplacian has " + std::to_string(l.rows()) +
                                " vertices");
  return 0.5 * (theta * l).cwiseProduct(theta).sum();
}

double factored_dirichlet_energy(const Eigen::MatrixXd& z, const Eigen::VectorXd& lambda_m) {
  if (z.cols() != lambda_m.size())
    throw std::invalid_argument("Z and lambda disagree on the basis size");
  double total = 0.0;
  for (int j = 0; j < z.cols(); ++j) total += lambda_m[j] * z.col(j).squaredNorm();
  return 0.5 * total;
}

void write_spectrum_csv(const Spectrum& s, int m, const std::string& path) {
  const int k = static_cast<int>(s.eigenvalues.size());
  if (m < 1 || m > k) throw std::invalid_argument("row count out of range for spectrum CSV");
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  char buf[32];
  for (int r = 0; r < m; ++r) {
    std::snprintf(buf, sizeof buf, "%.17g", s.eigenvalues[r]);
    out << buf;
    for (int v = 0; v < k; ++v) {
      std::snprintf(buf, sizeof buf, "%.17g", s.eigenvectors(v, r));
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw FormatError("failed writing " + path);
}

}  // namespace esm
