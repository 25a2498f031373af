#pragma once

#include <Eigen/Dense>

#include <string>

#include "esm/graph.hpp"

namespace esm {

/// Full eigendecomposition of a graph Laplacian: eigenvalues ascending with
/// matching orthonormal columns. Within a repeated eigenvalue any orthonormal
/// basis of the eigenspace is valid.
struct Spectrum {
  Eigen::VectorXd eigenvalues;   // K, ascending
  Eigen::MatrixXd eigenvectors;  // K x K
};

/// Bottom-m slice of a spectrum: the smoothest directions of the graph.
struct EigenBasis {
  Eigen::MatrixXd q_tilde;   // K x m, orthonormal columns
  Eigen::VectorXd lambda_m;  // m, ascending

  int m() const { return static_cast<int>(lambda_m.size()); }
  int num_vertices() const { return static_cast<int>(q_tilde.rows()); }
};

enum class SpectrumBackend { Auto, Analytic, Dense, Lanczos };

/// Auto picks Analytic when the structure permits, Dense up to 2048
/// vertices, Lanczos above.
inline constexpr int kDenseBackendMaxVertices = 2048;

Spectrum compute_spectrum(const WeightedGraph& g,
                          SpectrumBackend backend = SpectrumBackend::Auto);

/// Bottom-m eigenpairs with a deterministic tie-break at the cut: ordering is
/// by eigenvalue, then by lexicographic factor index for products, then by
/// solver column order.
EigenBasis bottom_eigenbasis(const WeightedGraph& g, int m,
                             SpectrumBackend backend = SpectrumBackend::Auto);

/// Bottom-m eigenpairs of a symmetric matrix by Lanczos with full
/// reorthogonalization, budgeted at 10*m Krylov steps. Throws
/// NumericalFailure when some requested Ritz residual stays above tol.
EigenBasis lanczos_bottom(const Eigen::MatrixXd& matrix, int m, double tol = 1e-8);

/// (1/2) tr(theta L theta^T): half the weighted sum of squared differences
/// of theta columns across edges. This is the convention whose factorized
/// form is (1/2) sum_j lambda_j ||z_j||^2.
double dirichlet_energy(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& laplacian);

/// Same penalty for theta = Z Qt^T written in the factorized variables:
/// (1/2) sum_j lambda_j ||z_j||^2.
double factored_dirichlet_energy(const Eigen::MatrixXd& z, const Eigen::VectorXd& lambda_m);

/// One row per eigenpair: eigenvalue, then the K eigenvector entries.
void write_spectrum_csv(const Spectrum& s, int m, const std::string& path);

}  // namespace esm
