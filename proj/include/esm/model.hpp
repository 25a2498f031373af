#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "esm/dataset.hpp"
#include "esm/prox.hpp"
#include "esm/spectra.hpp"

namespace esm {

struct FitReport {
  bool converged = true;
  int iterations = 0;
  double final_r1 = 0.0;
  double final_r2 = 0.0;
};

/// Fitted stratified model parameters, either dense (theta, n x K) or
/// factorized (Z, n x m, plus the eigenbasis tying the columns together).
struct StratParams {
  BaseKind base_kind = BaseKind::Logistic;
  int n = 0;
  int k = 0;
  bool factorized = false;
  Eigen::MatrixXd theta;  // dense form
  Eigen::MatrixXd z;      // factorized form
  EigenBasis basis;       // factorized form
  std::string graph_spec;
  std::vector<std::pair<std::string, double>> hyper;
  FitReport report;
};

/// n x K parameter matrix; Z Qt^T for factorized models.
Eigen::MatrixXd materialize(const StratParams& params);

/// Materialized copy of a factorized model; dense models pass through.
StratParams densify(const StratParams& params);

/// n*K when dense, m*(n + K) when factorized.
std::int64_t parameter_count(const StratParams& params);

struct SizeReport {
  std::int64_t parameters = 0;
  std::uint64_t serialized_bytes = 0;
};
SizeReport size_report(const StratParams& params);

/// Binary model file: magic ESM1, little-endian header (base kind, n, K, m
/// with 0 meaning dense, graph description, hyper-parameter table, fit
/// report), row-major float64 payload, CRC-32 over everything after the
/// magic. Loading verifies magic, completeness, and checksum.
void save_model(const StratParams& params, const std::string& path);
StratParams load_model(const std::string& path);

/// Average negative log-likelihood of the records under the model; empty
/// data yields NaN.
double anll(const StratParams& params, const Dataset& data);

struct AnllRow {
  std::string split;
  double anll = 0.0;
  int record_count = 0;
};
void write_anll_csv(const std::vector<AnllRow>& rows, const std::string& path);

}  // namespace esm
