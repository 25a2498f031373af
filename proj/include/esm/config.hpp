#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "esm/grid_search.hpp"
#include "esm/prox.hpp"
#include "esm/solver.hpp"

namespace esm {

enum class FitMode { Eigen, Standard, Separate, Common };

struct SynthBlock {
  int basis_m = 1;
  double records_per_node = 0.0;
  std::uint64_t seed = 0;
  std::string out_data;
  std::string out_truth;
};

/// A fully validated experiment plan read from a flat key = value file.
/// Unknown keys are rejected; nothing is computed during parsing beyond
/// checking the graph grammar.
struct ExperimentConfig {
  std::string graph;
  BaseKind base = BaseKind::Logistic;
  int n = 0;
  int num_vertices = 0;  // K, derived from the graph
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  bool intercept_exempt = false;
  FitMode mode = FitMode::Standard;
  int m = 0;  // used when mode == Eigen
  double rho = 1.0;
  int max_iter = 1000;
  double abs_tol = 1e-6;
  double rel_tol = 1e-4;
  ThetaTildeUpdate update = ThetaTildeUpdate::Exact;
  int threads = 0;  // 0: all cores
  std::string data_path;
  std::optional<SynthBlock> synth;
  std::array<double, 3> split_fractions{1.0, 0.0, 0.0};
  std::uint64_t split_seed = 0;
  std::string out_model = "model.esm";
  std::string out_diagnostics = "diagnostics.csv";
  std::string out_report = "anll.csv";
  std::optional<GridSearchSpec> search;
  std::string search_out = "search.csv";

  FitConfig fit_config() const;
};

enum class ConfigUse { Fit, Synth, Search };

/// Loads and validates; ConfigUse decides which blocks are mandatory (fit
/// wants data or a synth block, synth wants the synth block with output
/// paths, search wants grids).
ExperimentConfig load_config(const std::string& path, ConfigUse use);

}  // namespace esm
