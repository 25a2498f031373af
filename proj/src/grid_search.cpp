#include "esm/grid_search.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "esm/errors.hpp"
#include "esm/graph_spec.hpp"
#include "esm/model.hpp"

namespace esm {

namespace {

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double rank_key(const GridRow& row) {
  return std::isnan(row.val_anll) ? std::numeric_limits<double>::infinity() : row.val_anll;
}

bool row_less(const GridRow& a, const GridRow& b) {
  if (rank_key(a) != rank_key(b)) return rank_key(a) < rank_key(b);
  if (a.m != b.m) return a.m < b.m;
  if (a.gamma1 != b.gamma1) return a.gamma1 < b.gamma1;
  if (a.gamma2 != b.gamma2) return a.gamma2 < b.gamma2;
  return a.weights < b.weights;
}

}  // namespace

std::string substitute_weights(const std::string& graph_template,
                               const std::vector<std::string>& names,
                               const std::vector<double>& values) {
  std::string text = graph_template;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const std::string placeholder = "@" + names[i];
    const std::string value = format_value(values[i]);
    for (std::size_t at = text.find(placeholder); at != std::string::npos;
         at = text.find(placeholder, at + value.size()))
      text.replace(at, placeholder.size(), value);
  }
  return text;
}

GridResult grid_search(const GridSearchSpec& spec, const Dataset& data,
                       const std::string& graph_template, const FitConfig& config) {
  if (spec.gamma1.empty() || spec.gamma2.empty() || spec.m_values.empty())
    throw std::invalid_argument("grid search needs nonempty gamma1, gamma2, and m grids");
  for (const auto& [name, grid] : spec.graph_weights)
    if (grid.empty())
      throw std::invalid_argument("grid for graph weight '" + name + "' is empty");

  GridResult result;
  for (const auto& [name, grid] : spec.graph_weights) result.weight_names.push_back(name);

  // Weight combinations enumerated odometer-style, leftmost slowest.
  std::vector<std::size_t> at(spec.graph_weights.size(), 0);
  const Dataset train = data.subset(Split::Train);
  const Dataset val = data.subset(Split::Validation);
  const Dataset test = data.subset(Split::Test);
  const std::vector<LocalLossSpec> losses = node_losses(train);

  for (;;) {
    std::vector<double> weights;
    weights.reserve(at.size());
    for (std::size_t i = 0; i < at.size(); ++i)
      weights.push_back(spec.graph_weights[i].second[at[i]]);

    for (double gamma1 : spec.gamma1) {
      for (double gamma2 : spec.gamma2) {
        for (int m : spec.m_values) {
          GridRow row;
          row.gamma1 = gamma1;
          row.gamma2 = gamma2;
          row.weights = weights;
          row.m = m;
          row.train_anll = row.val_anll = row.test_anll =
              std::numeric_limits<double>::quiet_NaN();
          try {
            const WeightedGraph graph = parse_graph_spec(
                substitute_weights(graph_template, result.weight_names, weights));
            const LocalRegularizerSpec reg{gamma1, gamma2, spec.intercept_exempt};
            FitConfig fit_config = config;
            fit_config.m = m;
            const FitResult fit = fit_eigen_stratified(losses, reg, graph, fit_config);
            row.iterations = fit.params.report.iterations;
            row.converged = fit.params.report.converged;
            row.train_anll = anll(fit.params, train);
            row.val_anll = anll(fit.params, val);
            row.test_anll = anll(fit.params, test);
          } catch (const std::exception& e) {
            row.error = e.what();
          }
          result.rows.push_back(std::move(row));
        }
      }
    }

    std::size_t bump = 0;
    while (bump < at.size()) {
      if (++at[bump] < spec.graph_weights[bump].second.size()) break;
      at[bump] = 0;
      ++bump;
    }
    if (bump == at.size()) break;
  }

  std::stable_sort(result.rows.begin(), result.rows.end(), row_less);
  return result;
}

void write_grid_csv(const GridResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out << "gamma1,gamma2";
  for (const std::string& name : result.weight_names) out << ',' << name;
  out << ",m,train_anll,val_anll,test_anll,iterations,converged,error\n";
  for (const GridRow& row : result.rows) {
    out << format_value(row.gamma1) << ',' << format_value(row.gamma2);
    for (double w : row.weights) out << ',' << format_value(w);
    out << ',' << row.m << ',' << format_value(row.train_anll) << ','
        << format_value(row.val_anll) << ',' << format_value(row.test_anll) << ','
        << row.iterations << ',' << (row.converged ? 1 : 0) << ',' << row.error << '\n';
  }
  if (!out) throw FormatError("failed writing " + path);
}

}  // namespace esm
