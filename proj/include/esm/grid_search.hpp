#pragma once

#include <string>
#include <utility>
#include <vector>

#include "esm/dataset.hpp"
#include "esm/solver.hpp"

namespace esm {

/// Hyper-parameter grids; every listed vector must be nonempty. Named
/// weights substitute into @name placeholders of the graph template.
struct GridSearchSpec {
  std::vector<double> gamma1{0.0};
  std::vector<double> gamma2{0.0};
  std::vector<int> m_values;
  std::vector<std::pair<std::string, std::vector<double>>> graph_weights;
  bool intercept_exempt = false;
};

struct GridRow {
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  std::vector<double> weights;  // aligned with GridResult::weight_names
  int m = 0;
  double train_anll = 0.0;
  double val_anll = 0.0;
  double test_anll = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string error;  // nonempty when the fit failed; ANLLs are NaN then
};

struct GridResult {
  std::vector<std::string> weight_names;
  std::vector<GridRow> rows;  // ascending validation ANLL; failures last
};

/// Replaces each @name placeholder with its value; leftover placeholders
/// surface later as graph parse errors.
std::string substitute_weights(const std::string& graph_template,
                               const std::vector<std::string>& names,
                               const std::vector<double>& values);

/// Fits every grid point on the train split, scores ANLL on all three
/// splits, and ranks by validation ANLL (ties: smaller m, then the hyper
/// values in order). Individual fit failures are recorded per row and the
/// search continues.
GridResult grid_search(const GridSearchSpec& spec, const Dataset& data,
                       const std::string& graph_template, const FitConfig& config);

void write_grid_csv(const GridResult& result, const std::string& path);

}  // namespace esm
