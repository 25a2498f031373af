#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "esm/prox.hpp"

namespace esm {

enum class Split { Train, Validation, Test };

struct DataRecord {
  int z = 1;          // stratification value, 1..K
  Eigen::VectorXd x;  // features, logistic only
  int y = 0;          // 0/1 for logistic, outcome 1..n for discrete
};

struct DatasetSchema {
  BaseKind kind = BaseKind::Logistic;
  int n = 0;  // feature length (logistic) or number of outcomes (discrete)
  int k = 0;  // number of stratification values
};

struct Dataset {
  DatasetSchema schema;
  std::vector<DataRecord> records;
  std::vector<Split> splits;  // parallel to records, defaults to Train
  std::string provenance;

  Dataset subset(Split s) const;
  int count(Split s) const;
};

/// Header must be z,x1,...,xn,y (logistic) or z,y (discrete); z and y are
/// integers, features are reals. Malformed rows are collected and reported
/// together with their 1-based line numbers.
Dataset load_csv(const std::string& path, const DatasetSchema& schema);
void save_csv(const Dataset& data, const std::string& path);

/// Seeded i.i.d. assignment of records to train/validation/test; fractions
/// must be nonnegative and sum to one.
Dataset split(Dataset data, const std::array<double, 3>& fractions, std::uint64_t seed);

/// Per-node loss specs built from one split (all records when split is
/// absent): feature/label blocks for logistic, outcome counts for discrete.
std::vector<LocalLossSpec> node_losses(const Dataset& data,
                                       std::optional<Split> split = std::nullopt);

}  // namespace esm
