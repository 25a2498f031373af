#include "esm/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>
#include <vector>

#include "esm/errors.hpp"
#include "esm/graph_spec.hpp"

namespace esm {

namespace {

std::string trim(const std::string& s) {
  std::size_t first = s.find_first_not_of(" \t\r");
  std::size_t last = s.find_last_not_of(" \t\r");
  if (first == std::string::npos) return "";
  return s.substr(first, last - first + 1);
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

class KeyValues {
 public:
  explicit KeyValues(const std::string& path) : path_(path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open config " + path);
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
      ++line_number;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string text = trim(line);
      if (text.empty()) continue;
      const std::size_t eq = text.find('=');
      if (eq == std::string::npos)
        throw FormatError(path + ": line " + std::to_string(line_number) +
                          ": expected key = value");
      const std::string key = trim(text.substr(0, eq));
      const std::string value = trim(text.substr(eq + 1));
      if (key.empty())
        throw FormatError(path + ": line " + std::to_string(line_number) + ": empty key");
      if (values_.count(key))
        throw FormatError(path + ": line " + std::to_string(line_number) + ": duplicate key '" +
                          key + "'");
      values_[key] = value;
    }
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::optional<std::string> take(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    std::string value = it->second;
    values_.erase(it);
    return value;
  }

  std::string require(const std::string& key) {
    auto value = take(key);
    if (!value) throw FormatError(path_ + ": missing required key '" + key + "'");
    return *value;
  }

  /// Keys with the given prefix, in file-independent sorted order.
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const {
    std::vector<std::string> keys;
    for (const auto& [key, value] : values_)
      if (key.rfind(prefix, 0) == 0) keys.push_back(key);
    return keys;
  }

  void reject_leftovers() const {
    if (values_.empty()) return;
    std::string message = path_ + ": unknown key(s):";
    for (const auto& [key, value] : values_) message += " '" + key + "'";
    throw FormatError(message);
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::map<std::string, std::string> values_;
};

double parse_double(const KeyValues& kv, const std::string& key, const std::string& text) {
  double out = 0.0;
  const std::string t = trim(text);
  const auto result = std::from_chars(t.data(), t.data() + t.size(), out);
  if (result.ec != std::errc() || result.ptr != t.data() + t.size())
    throw FormatError(kv.path() + ": key '" + key + "': expected a number, got '" + text + "'");
  return out;
}

long parse_int(const KeyValues& kv, const std::string& key, const std::string& text) {
  long out = 0;
  const std::string t = trim(text);
  const auto result = std::from_chars(t.data(), t.data() + t.size(), out);
  if (result.ec != std::errc() || result.ptr != t.data() + t.size())
    throw FormatError(kv.path() + ": key '" + key + "': expected an integer, got '" + text + "'");
  return out;
}

bool parse_bool(const KeyValues& kv, const std::string& key, const std::string& text) {
  const std::string t = lower(trim(text));
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw FormatError(kv.path() + ": key '" + key + "': expected true/false, got '" + text + "'");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = text.find(',', start);
    if (comma == std::string::npos) {
      items.push_back(trim(text.substr(start)));
      return items;
    }
    items.push_back(trim(text.substr(start, comma - start)));
    start = comma + 1;
  }
}

std::vector<double> parse_double_list(const KeyValues& kv, const std::string& key,
                                      const std::string& text) {
  std::vector<double> values;
  for (const std::string& item : split_list(text)) values.push_back(parse_double(kv, key, item));
  if (values.empty()) throw FormatError(kv.path() + ": key '" + key + "': empty list");
  return values;
}

}  // namespace

FitConfig ExperimentConfig::fit_config() const {
  FitConfig config;
  config.rho = rho;
  config.max_iter = max_iter;
  config.abs_tol = abs_tol;
  config.rel_tol = rel_tol;
  if (mode == FitMode::Eigen) config.m = m;
  config.update = update;
  config.threads = threads;
  return config;
}

ExperimentConfig load_config(const std::string& path, ConfigUse use) {
  KeyValues kv(path);
  ExperimentConfig config;

  config.graph = kv.require("graph");
  {
    const std::string base = lower(kv.require("base"));
    if (base == "logistic") config.base = BaseKind::Logistic;
    else if (base == "discrete") config.base = BaseKind::DiscreteDistribution;
    else throw FormatError(path + ": key 'base': expected logistic or discrete");
  }
  config.n = static_cast<int>(parse_int(kv, "n", kv.require("n")));
  if (config.n < 1) throw FormatError(path + ": key 'n': must be >= 1");

  if (auto v = kv.take("gamma1")) config.gamma1 = parse_double(kv, "gamma1", *v);
  if (auto v = kv.take("gamma2")) config.gamma2 = parse_double(kv, "gamma2", *v);
  if (config.gamma1 < 0 || config.gamma2 < 0)
    throw FormatError(path + ": regularizer weights must be nonnegative");
  if (auto v = kv.take("intercept_exempt"))
    config.intercept_exempt = parse_bool(kv, "intercept_exempt", *v);

  if (auto v = kv.take("m")) {
    const std::string value = lower(trim(*v));
    if (value == "all") config.mode = FitMode::Standard;
    else if (value == "separate") config.mode = FitMode::Separate;
    else if (value == "common") config.mode = FitMode::Common;
    else {
      config.mode = FitMode::Eigen;
      config.m = static_cast<int>(parse_int(kv, "m", *v));
      if (config.m < 1) throw FormatError(path + ": key 'm': must be >= 1, all, separate, or common");
    }
  }

  if (auto v = kv.take("rho")) config.rho = parse_double(kv, "rho", *v);
  if (!(config.rho > 0)) throw FormatError(path + ": key 'rho': must be positive");
  if (auto v = kv.take("max_iter")) config.max_iter = static_cast<int>(parse_int(kv, "max_iter", *v));
  if (config.max_iter < 1) throw FormatError(path + ": key 'max_iter': must be >= 1");
  if (auto v = kv.take("abs_tol")) config.abs_tol = parse_double(kv, "abs_tol", *v);
  if (auto v = kv.take("rel_tol")) config.rel_tol = parse_double(kv, "rel_tol", *v);
  if (config.abs_tol < 0 || config.rel_tol < 0)
    throw FormatError(path + ": tolerances must be nonnegative");
  if (auto v = kv.take("update")) {
    const std::string value = lower(trim(*v));
    if (value == "exact") config.update = ThetaTildeUpdate::Exact;
    else if (value == "single") config.update = ThetaTildeUpdate::SingleCopy;
    else throw FormatError(path + ": key 'update': expected exact or single");
  }
  if (auto v = kv.take("threads")) config.threads = static_cast<int>(parse_int(kv, "threads", *v));

  if (auto v = kv.take("data")) config.data_path = *v;

  const bool any_synth_key = !kv.keys_with_prefix("synth.").empty();
  if (any_synth_key) {
    SynthBlock synth;
    synth.basis_m = static_cast<int>(parse_int(kv, "synth.basis_m", kv.require("synth.basis_m")));
    synth.records_per_node =
        parse_double(kv, "synth.records_per_node", kv.require("synth.records_per_node"));
    if (synth.basis_m < 1) throw FormatError(path + ": key 'synth.basis_m': must be >= 1");
    if (!(synth.records_per_node >= 0))
      throw FormatError(path + ": key 'synth.records_per_node': must be nonnegative");
    if (auto v = kv.take("synth.seed"))
      synth.seed = static_cast<std::uint64_t>(parse_int(kv, "synth.seed", *v));
    if (auto v = kv.take("synth.out_data")) synth.out_data = *v;
    if (auto v = kv.take("synth.out_truth")) synth.out_truth = *v;
    config.synth = synth;
  }

  if (auto v = kv.take("split")) {
    const std::vector<double> fractions = parse_double_list(kv, "split", *v);
    if (fractions.size() != 3)
      throw FormatError(path + ": key 'split': expected three fractions");
    std::copy(fractions.begin(), fractions.end(), config.split_fractions.begin());
  }
  if (auto v = kv.take("split_seed"))
    config.split_seed = static_cast<std::uint64_t>(parse_int(kv, "split_seed", *v));
  for (double f : config.split_fractions)
    if (!(f >= 0)) throw FormatError(path + ": key 'split': fractions must be nonnegative");
  if (std::abs(config.split_fractions[0] + config.split_fractions[1] +
               config.split_fractions[2] - 1.0) > 1e-9)
    throw FormatError(path + ": key 'split': fractions must sum to 1");

  if (auto v = kv.take("out_model")) config.out_model = *v;
  if (auto v = kv.take("out_diagnostics")) config.out_diagnostics = *v;
  if (auto v = kv.take("out_report")) config.out_report = *v;

  const auto weight_keys = kv.keys_with_prefix("search.weight.");
  const bool any_search_key =
      !kv.keys_with_prefix("search.").empty();
  if (any_search_key) {
    GridSearchSpec search;
    search.intercept_exempt = config.intercept_exempt;
    if (auto v = kv.take("search.gamma1")) search.gamma1 = parse_double_list(kv, "search.gamma1", *v);
    else search.gamma1 = {config.gamma1};
    if (auto v = kv.take("search.gamma2")) search.gamma2 = parse_double_list(kv, "search.gamma2", *v);
    else search.gamma2 = {config.gamma2};
    {
      const std::string m_list = kv.require("search.m");
      for (const std::string& item : split_list(m_list)) {
        const int m = static_cast<int>(parse_int(kv, "search.m", item));
        if (m < 1) throw FormatError(path + ": key 'search.m': entries must be >= 1");
        search.m_values.push_back(m);
      }
    }
    for (const std::string& key : weight_keys) {
      const std::string name = key.substr(std::string("search.weight.").size());
      if (name.empty()) throw FormatError(path + ": key '" + key + "': empty weight name");
      search.graph_weights.emplace_back(name, parse_double_list(kv, key, *kv.take(key)));
    }
    if (auto v = kv.take("search.out")) config.search_out = *v;
    config.search = std::move(search);
  }

  kv.reject_leftovers();

  // The graph must parse; placeholder weights are substituted with their
  // first grid value just to validate the grammar.
  std::string graph_text = config.graph;
  if (config.search) {
    std::vector<std::string> names;
    std::vector<double> first;
    for (const auto& [name, grid] : config.search->graph_weights) {
      names.push_back(name);
      first.push_back(grid.front());
    }
    graph_text = substitute_weights(graph_text, names, first);
  }
  try {
    config.num_vertices = parse_graph_spec(graph_text).num_vertices();
  } catch (const ParseError& e) {
    throw FormatError(path + ": key 'graph': " + e.what());
  }
  if (config.mode == FitMode::Eigen && config.m > config.num_vertices)
    throw FormatError(path + ": key 'm': exceeds the number of graph vertices");

  if (use == ConfigUse::Fit && config.data_path.empty() && !config.synth)
    throw FormatError(path + ": a fit needs either 'data' or a synth.* block");
  if (!config.data_path.empty() && config.synth)
    throw FormatError(path + ": 'data' and synth.* are mutually exclusive");
  if (use == ConfigUse::Synth) {
    if (!config.synth) throw FormatError(path + ": synth needs a synth.* block");
    if (config.synth->out_data.empty())
      throw FormatError(path + ": synth needs 'synth.out_data'");
  }
  if (use == ConfigUse::Search) {
    if (!config.search) throw FormatError(path + ": search needs search.* keys");
    if (config.data_path.empty() && !config.synth)
      throw FormatError(path + ": a search needs either 'data' or a synth.* block");
    for (int m : config.search->m_values)
      if (m > config.num_vertices)
        throw FormatError(path + ": key 'search.m': entry exceeds the number of graph vertices");
  }
  return config;
}

}  // namespace esm
