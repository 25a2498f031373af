#include "esm/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "esm/errors.hpp"
#include "esm/random.hpp"

namespace esm {

namespace {

std::string expected_header(const DatasetSchema& schema) {
  if (schema.kind == BaseKind::DiscreteDistribution) return "z,y";
  std::string header = "z";
  for (int i = 1; i <= schema.n; ++i) header += ",x" + std::to_string(i);
  return header + ",y";
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

bool parse_int_field(std::string_view s, long& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto result = std::from_chars(s.data(), s.data() + s.size(), out);
  return result.ec == std::errc() && result.ptr == s.data() + s.size();
}

bool parse_double_field(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto result = std::from_chars(s.data(), s.data() + s.size(), out);
  return result.ec == std::errc() && result.ptr == s.data() + s.size();
}

void check_schema(const DatasetSchema& schema) {
  if (schema.n < 1) throw std::invalid_argument("schema needs n >= 1");
  if (schema.k < 1) throw std::invalid_argument("schema needs K >= 1");
}

}  // namespace

Dataset Dataset::subset(Split s) const {
  Dataset out;
  out.schema = schema;
  out.provenance = provenance;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (splits[i] != s) continue;
    out.records.push_back(records[i]);
    out.splits.push_back(s);
  }
  return out;
}

int Dataset::count(Split s) const {
  int total = 0;
  for (Split assigned : splits) total += assigned == s ? 1 : 0;
  return total;
}

Dataset load_csv(const std::string& path, const DatasetSchema& schema) {
  check_schema(schema);
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  const bool logistic = schema.kind == BaseKind::Logistic;
  const std::size_t columns = logistic ? static_cast<std::size_t>(schema.n) + 2 : 2;

  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": empty file");
  if (std::string(trim(line)) != expected_header(schema))
    throw FormatError(path + ": line 1: expected header '" + expected_header(schema) + "'");

  Dataset data;
  data.schema = schema;
  data.provenance = path;
  std::vector<std::string> problems;
  auto complain = [&](int line_number, const std::string& what) {
    if (problems.size() < 20)
      problems.push_back("line " + std::to_string(line_number) + ": " + what);
  };

  int line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != columns) {
      complain(line_number, "expected " + std::to_string(columns) + " fields, got " +
                                std::to_string(fields.size()));
      continue;
    }
    DataRecord record;
    long z = 0, y = 0;
    bool ok = parse_int_field(fields[0], z) && parse_int_field(fields[columns - 1], y);
    if (logistic) {
      record.x.resize(schema.n);
      for (int i = 0; ok && i < schema.n; ++i)
        ok = parse_double_field(fields[static_cast<std::size_t>(i) + 1], record.x[i]);
    }
    if (!ok) {
      complain(line_number, "non-numeric or malformed field");
      continue;
    }
    if (z < 1 || z > schema.k) {
      complain(line_number, "z = " + std::to_string(z) + " outside 1.." + std::to_string(schema.k));
      continue;
    }
    if (logistic ? (y != 0 && y != 1) : (y < 1 || y > schema.n)) {
      complain(line_number, "y = " + std::to_string(y) + " out of range");
      continue;
    }
    record.z = static_cast<int>(z);
    record.y = static_cast<int>(y);
    data.records.push_back(std::move(record));
  }
  if (!problems.empty()) {
    std::string message = path + ": " + std::to_string(problems.size()) + " malformed row(s)";
    for (const std::string& p : problems) message += "\n  " + p;
    throw FormatError(message);
  }
  data.splits.assign(data.records.size(), Split::Train);
  return data;
}

void save_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out << expected_header(data.schema) << '\n';
  char buf[32];
  for (const DataRecord& record : data.records) {
    out << record.z;
    if (data.schema.kind == BaseKind::Logistic) {
      for (int i = 0; i < record.x.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", record.x[i]);
        out << ',' << buf;
      }
    }
    out << ',' << record.y << '\n';
  }
  if (!out) throw FormatError("failed writing " + path);
}

Dataset split(Dataset data, const std::array<double, 3>& fractions, std::uint64_t seed) {
  for (double f : fractions)
    if (!(f >= 0.0)) throw std::invalid_argument("split fractions must be nonnegative");
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must sum to 1");
  Rng rng(seed);
  data.splits.resize(data.records.size());
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const double u = rng.uniform();
    data.splits[i] = u < fractions[0]             ? Split::Train
                     : u < fractions[0] + fractions[1] ? Split::Validation
                                                       : Split::Test;
  }
  return data;
}

std::vector<LocalLossSpec> node_losses(const Dataset& data, std::optional<Split> split) {
  check_schema(data.schema);
  const int k = data.schema.k;
  const int n = data.schema.n;
  const bool logistic = data.schema.kind == BaseKind::Logistic;

  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    if (split && data.splits[i] != *split) continue;
    const int z = data.records[i].z;
    if (z < 1 || z > k)
      throw std::invalid_argument("record " + std::to_string(i) + ": z = " + std::to_string(z) +
                                  " outside 1.." + std::to_string(k));
    ++counts[static_cast<std::size_t>(z - 1)];
  }

  std::vector<LocalLossSpec> losses;
  losses.reserve(static_cast<std::size_t>(k));
  if (logistic) {
    for (int node = 0; node < k; ++node) {
      LogisticLoss loss;
      loss.x.resize(counts[static_cast<std::size_t>(node)], n);
      loss.y.resize(counts[static_cast<std::size_t>(node)]);
      losses.emplace_back(std::move(loss));
    }
    std::vector<int> filled(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < data.records.size(); ++i) {
      if (split && data.splits[i] != *split) continue;
      const DataRecord& record = data.records[i];
      if (record.x.size() != n)
        throw std::invalid_argument("record " + std::to_string(i) + ": feature length " +
                                    std::to_string(record.x.size()) + " differs from n = " +
                                    std::to_string(n));
      auto& loss = std::get<LogisticLoss>(losses[static_cast<std::size_t>(record.z - 1)]);
      const int row = filled[static_cast<std::size_t>(record.z - 1)]++;
      loss.x.row(row) = record.x.transpose();
      loss.y[row] = record.y;
    }
  } else {
    for (int node = 0; node < k; ++node)
      losses.emplace_back(DiscreteLoss{Eigen::VectorXd::Zero(n)});
    for (std::size_t i = 0; i < data.records.size(); ++i) {
      if (split && data.splits[i] != *split) continue;
      const DataRecord& record = data.records[i];
      if (record.y < 1 || record.y > n)
        throw std::invalid_argument("record " + std::to_string(i) + ": outcome " +
                                    std::to_string(record.y) + " outside 1.." + std::to_string(n));
      std::get<DiscreteLoss>(losses[static_cast<std::size_t>(record.z - 1)])
          .counts[record.y - 1] += 1.0;
    }
  }
  return losses;
}

}  // namespace esm
