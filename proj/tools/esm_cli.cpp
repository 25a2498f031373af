#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "esm/config.hpp"
#include "esm/dataset.hpp"
#include "esm/errors.hpp"
#include "esm/graph_spec.hpp"
#include "esm/grid_search.hpp"
#include "esm/model.hpp"
#include "esm/solver.hpp"
#include "esm/spectra.hpp"
#include "esm/synth.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNotConverged = 1;
constexpr int kExitBadInput = 2;

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_matrix_csv(const Eigen::MatrixXd& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw esm::FormatError("cannot open " + path + " for writing");
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      out << (j ? "," : "") << format_value(m(i, j));
    out << '\n';
  }
  if (!out) throw esm::FormatError("failed writing " + path);
}

int run_spectra(const std::string& spec, std::optional<int> m, const std::string& out) {
  const esm::WeightedGraph graph = esm::parse_graph_spec(spec);
  const int rows = m.value_or(graph.num_vertices());
  if (rows < 1 || rows > graph.num_vertices())
    throw std::invalid_argument("--m must lie in [1, " +
                                std::to_string(graph.num_vertices()) + "]");
  const esm::Spectrum s = esm::compute_spectrum(graph);
  for (int i = 0; i < rows; ++i) std::cout << (i ? "," : "") << format_value(s.eigenvalues[i]);
  std::cout << '\n';
  if (!out.empty()) esm::write_spectrum_csv(s, rows, out);
  return kExitOk;
}

esm::Dataset obtain_dataset(const esm::ExperimentConfig& config) {
  esm::Dataset data;
  if (config.synth) {
    const esm::SynthResult synth =
        esm::synth_smooth(esm::parse_graph_spec(config.graph), config.synth->basis_m, config.n,
                          config.synth->records_per_node, config.base, config.synth->seed);
    data = synth.data;
  } else {
    data = esm::load_csv(config.data_path, {config.base, config.n, config.num_vertices});
  }
  return esm::split(std::move(data), config.split_fractions, config.split_seed);
}

int run_fit(const std::string& config_path, std::optional<int> threads,
            const std::string& out_override) {
  esm::ExperimentConfig config = esm::load_config(config_path, esm::ConfigUse::Fit);
  if (threads) config.threads = *threads;
  if (!out_override.empty()) config.out_model = out_override;

  const esm::Dataset data = obtain_dataset(config);
  const std::vector<esm::LocalLossSpec> losses =
      esm::node_losses(data.subset(esm::Split::Train));
  const esm::LocalRegularizerSpec reg{config.gamma1, config.gamma2, config.intercept_exempt};
  const esm::FitConfig fit_config = config.fit_config();

  esm::StratParams params;
  esm::FitDiagnostics diagnostics;
  if (config.mode == esm::FitMode::Separate) {
    params = esm::fit_separate(losses, reg, config.num_vertices, fit_config);
  } else if (config.mode == esm::FitMode::Common) {
    params = esm::fit_common(losses, reg, config.num_vertices, fit_config);
  } else {
    const esm::WeightedGraph graph = esm::parse_graph_spec(config.graph);
    esm::FitResult result = esm::fit_eigen_stratified(losses, reg, graph, fit_config);
    diagnostics = std::move(result.diagnostics);
    // A standard stratified fit (m = K) is stored dense, which is the
    // smaller representation at full rank.
    params = config.mode == esm::FitMode::Eigen ? result.params : esm::densify(result.params);
  }

  esm::save_model(params, config.out_model);
  esm::write_diagnostics_csv(diagnostics, config.out_diagnostics);
  std::vector<esm::AnllRow> report;
  const std::pair<esm::Split, const char*> splits[] = {
      {esm::Split::Train, "train"},
      {esm::Split::Validation, "validation"},
      {esm::Split::Test, "test"},
  };
  for (const auto& [split, name] : splits) {
    const esm::Dataset part = data.subset(split);
    report.push_back({name, esm::anll(params, part), static_cast<int>(part.records.size())});
  }
  esm::write_anll_csv(report, config.out_report);

  std::cout << "model: " << config.out_model << '\n';
  std::cout << "converged: " << (params.report.converged ? "yes" : "no")
            << " after " << params.report.iterations << " iterations\n";
  for (const esm::AnllRow& row : report)
    std::cout << row.split << " anll: " << format_value(row.anll) << " (" << row.record_count
              << " records)\n";
  return params.report.converged ? kExitOk : kExitNotConverged;
}

int run_eval(const std::string& model_path, const std::string& data_path,
             const std::string& out) {
  const esm::StratParams params = esm::load_model(model_path);
  const esm::Dataset data =
      esm::load_csv(data_path, {params.base_kind, params.n, params.k});
  const double value = esm::anll(params, data);
  std::cout << format_value(value) << '\n';
  if (!out.empty())
    esm::write_anll_csv({{"all", value, static_cast<int>(data.records.size())}}, out);
  return kExitOk;
}

int run_synth(const std::string& config_path, std::optional<long> seed,
              const std::string& out_override) {
  esm::ExperimentConfig config = esm::load_config(config_path, esm::ConfigUse::Synth);
  if (seed) config.synth->seed = static_cast<std::uint64_t>(*seed);
  if (!out_override.empty()) config.synth->out_data = out_override;
  const esm::SynthResult result =
      esm::synth_smooth(esm::parse_graph_spec(config.graph), config.synth->basis_m, config.n,
                        config.synth->records_per_node, config.base, config.synth->seed);
  esm::save_csv(result.data, config.synth->out_data);
  if (!config.synth->out_truth.empty())
    write_matrix_csv(result.theta_true, config.synth->out_truth);
  std::cout << result.data.records.size() << " records -> " << config.synth->out_data << '\n';
  return kExitOk;
}

int run_search(const std::string& config_path, std::optional<int> threads,
               const std::string& out_override) {
  esm::ExperimentConfig config = esm::load_config(config_path, esm::ConfigUse::Search);
  if (threads) config.threads = *threads;
  if (!out_override.empty()) config.search_out = out_override;

  const esm::Dataset data = obtain_dataset(config);
  const esm::GridResult result =
      esm::grid_search(*config.search, data, config.graph, config.fit_config());
  esm::write_grid_csv(result, config.search_out);

  std::cout << result.rows.size() << " grid points -> " << config.search_out << '\n';
  if (!result.rows.empty() && result.rows.front().error.empty()) {
    const esm::GridRow& best = result.rows.front();
    std::cout << "best: m=" << best.m << " gamma1=" << format_value(best.gamma1)
              << " gamma2=" << format_value(best.gamma2)
              << " val_anll=" << format_value(best.val_anll) << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stratified model fitting with Laplacian eigenbasis constraints"};
  app.require_subcommand(1);

  std::string spectra_spec, spectra_out;
  std::optional<int> spectra_m;
  CLI::App* spectra = app.add_subcommand("spectra", "eigenvalues of a graph description");
  spectra->add_option("graph", spectra_spec, "graph description, e.g. product(path(2,15),path(27,175))")
      ->required();
  spectra->add_option("--m", spectra_m, "how many bottom eigenpairs (default: all)");
  spectra->add_option("--out", spectra_out, "CSV output path (eigenvalue, then eigenvector)");

  std::string fit_config_path, fit_out;
  std::optional<int> fit_threads;
  CLI::App* fit = app.add_subcommand("fit", "fit a model from a config file");
  fit->add_option("config", fit_config_path, "config file")->required();
  fit->add_option("--threads", fit_threads, "worker threads (0 = all cores)");
  fit->add_option("--out", fit_out, "override the model output path");

  std::string eval_model, eval_data, eval_out;
  CLI::App* eval = app.add_subcommand("eval", "average NLL of a saved model on a dataset");
  eval->add_option("model", eval_model, "model file")->required();
  eval->add_option("data", eval_data, "dataset CSV")->required();
  eval->add_option("--out", eval_out, "write a one-row report CSV");

  std::string synth_config_path, synth_out;
  std::optional<long> synth_seed;
  CLI::App* synth = app.add_subcommand("synth", "write a synthetic dataset");
  synth->add_option("config", synth_config_path, "config file")->required();
  synth->add_option("--seed", synth_seed, "override synth.seed");
  synth->add_option("--out", synth_out, "override synth.out_data");

  std::string search_config_path, search_out;
  std::optional<int> search_threads;
  CLI::App* search = app.add_subcommand("search", "hyper-parameter grid search");
  search->add_option("config", search_config_path, "config file")->required();
  search->add_option("--threads", search_threads, "worker threads (0 = all cores)");
  search->add_option("--out", search_out, "override search.out");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitBadInput;
  }

  try {
    if (spectra->parsed()) return run_spectra(spectra_spec, spectra_m, spectra_out);
    if (fit->parsed()) return run_fit(fit_config_path, fit_threads, fit_out);
    if (eval->parsed()) return run_eval(eval_model, eval_data, eval_out);
    if (synth->parsed()) return run_synth(synth_config_path, synth_seed, synth_out);
    if (search->parsed()) return run_search(search_config_path, search_threads, search_out);
  } catch (const esm::NumericalFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNotConverged;
  } catch (const esm::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitBadInput;
  }
  return kExitBadInput;
}
