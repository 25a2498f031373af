#include "esm/model.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "esm/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian; byte swapping is not implemented");

namespace esm {

namespace {

constexpr char kMagic[4] = {'E', 'S', 'M', '1'};

std::uint32_t crc32(const unsigned char* data, std::size_t size) {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int bit = 0; bit < 8; ++bit) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xffffffffu;
  for (std::size_t i = 0; i < size; ++i) crc = table[(crc ^ data[i]) & 0xffu] ^ (crc >> 8);
  return crc ^ 0xffffffffu;
}

class Writer {
 public:
  void u8(std::uint8_t v) { raw(&v, 1); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void f64(double v) { raw(&v, 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void matrix_row_major(const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) f64(m(i, j));
  }
  const std::vector<unsigned char>& bytes() const { return bytes_; }

 private:
  void raw(const void* p, std::size_t size) {
    const auto* c = static_cast<const unsigned char*>(p);
    bytes_.insert(bytes_.end(), c, c + size);
  }
  std::vector<unsigned char> bytes_;
};

class Reader {
 public:
  Reader(const unsigned char* data, std::size_t size) : data_(data), size_(size) {}
  std::uint8_t u8() { return *take(1); }
  std::uint32_t u32() {
    std::uint32_t v;
    std::memcpy(&v, take(4), 4);
    return v;
  }
  double f64() {
    double v;
    std::memcpy(&v, take(8), 8);
    return v;
  }
  std::string str() {
    const std::uint32_t size = u32();
    const unsigned char* p = take(size);
    return std::string(reinterpret_cast<const char*>(p), size);
  }
  Eigen::MatrixXd matrix_row_major(int rows, int cols) {
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = f64();
    return m;
  }

 private:
  const unsigned char* take(std::size_t size) {
    if (pos_ + size > size_) throw FormatError("model file is truncated");
    const unsigned char* p = data_ + pos_;
    pos_ += size;
    return p;
  }
  const unsigned char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::vector<unsigned char> encode(const StratParams& params) {
  Writer w;
  w.u8(static_cast<std::uint8_t>(kMagic[0]));
  w.u8(static_cast<std::uint8_t>(kMagic[1]));
  w.u8(static_cast<std::uint8_t>(kMagic[2]));
  w.u8(static_cast<std::uint8_t>(kMagic[3]));
  w.u32(params.base_kind == BaseKind::Logistic ? 0u : 1u);
  w.u32(static_cast<std::uint32_t>(params.n));
  w.u32(static_cast<std::uint32_t>(params.k));
  w.u32(params.factorized ? static_cast<std::uint32_t>(params.basis.m()) : 0u);
  w.str(params.graph_spec);
  w.u32(static_cast<std::uint32_t>(params.hyper.size()));
  for (const auto& [key, value] : params.hyper) {
    w.str(key);
    w.f64(value);
  }
  w.u8(params.report.converged ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(params.report.iterations));
  w.f64(params.report.final_r1);
  w.f64(params.report.final_r2);
  if (params.factorized) {
    w.matrix_row_major(params.z);
    w.matrix_row_major(params.basis.q_tilde);
    for (int j = 0; j < params.basis.m(); ++j) w.f64(params.basis.lambda_m[j]);
  } else {
    w.matrix_row_major(params.theta);
  }
  return w.bytes();
}

void validate_params(const StratParams& params) {
  if (params.n < 1 || params.k < 1)
    throw std::invalid_argument("model must have n >= 1 and K >= 1");
  if (params.factorized) {
    if (params.z.rows() != params.n || params.basis.num_vertices() != params.k ||
        params.z.cols() != params.basis.m())
      throw std::invalid_argument("factorized model has inconsistent shapes");
  } else if (params.theta.rows() != params.n || params.theta.cols() != params.k) {
    throw std::invalid_argument("dense model has inconsistent shapes");
  }
}

}  // namespace

Eigen::MatrixXd materialize(const StratParams& params) {
  validate_params(params);
  if (!params.factorized) return params.theta;
  return params.z * params.basis.q_tilde.transpose();
}

StratParams densify(const StratParams& params) {
  if (!params.factorized) return params;
  StratParams dense = params;
  dense.factorized = false;
  dense.theta = materialize(params);
  dense.z.resize(0, 0);
  dense.basis = EigenBasis{};
  return dense;
}

std::int64_t parameter_count(const StratParams& params) {
  validate_params(params);
  if (params.factorized)
    return static_cast<std::int64_t>(params.basis.m()) * (params.n + params.k);
  return static_cast<std::int64_t>(params.n) * params.k;
}

SizeReport size_report(const StratParams& params) {
  return {parameter_count(params), encode(params).size() + 4};
}

void save_model(const StratParams& params, const std::string& path) {
  validate_params(params);
  std::vector<unsigned char> bytes = encode(params);
  const std::uint32_t checksum = crc32(bytes.data() + 4, bytes.size() - 4);
  for (int b = 0; b < 4; ++b)
    bytes.push_back(static_cast<unsigned char>((checksum >> (8 * b)) & 0xffu));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing " + path);
}

StratParams load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 8) throw FormatError(path + ": model file is truncated");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError(path + ": not a model file (bad magic)");
  std::uint32_t stored = 0;
  std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
  const std::uint32_t computed = crc32(bytes.data() + 4, bytes.size() - 8);
  if (stored != computed) throw FormatError(path + ": checksum mismatch");

  Reader r(bytes.data() + 4, bytes.size() - 8);
  StratParams params;
  const std::uint32_t kind = r.u32();
  if (kind > 1) throw FormatError(path + ": unknown base kind");
  params.base_kind = kind == 0 ? BaseKind::Logistic : BaseKind::DiscreteDistribution;
  params.n = static_cast<int>(r.u32());
  params.k = static_cast<int>(r.u32());
  const int m = static_cast<int>(r.u32());
  params.graph_spec = r.str();
  const std::uint32_t hyper_count = r.u32();
  if (hyper_count > 1024) throw FormatError(path + ": hyper-parameter table too large");
  params.hyper.reserve(hyper_count);
  for (std::uint32_t i = 0; i < hyper_count; ++i) {
    std::string key = r.str();
    const double value = r.f64();
    params.hyper.emplace_back(std::move(key), value);
  }
  params.report.converged = r.u8() != 0;
  params.report.iterations = static_cast<int>(r.u32());
  params.report.final_r1 = r.f64();
  params.report.final_r2 = r.f64();
  if (params.n < 1 || params.k < 1 || m < 0 || m > params.k)
    throw FormatError(path + ": inconsistent model dimensions");
  if (m > 0) {
    params.factorized = true;
    params.z = r.matrix_row_major(params.n, m);
    params.basis.q_tilde = r.matrix_row_major(params.k, m);
    params.basis.lambda_m.resize(m);
    for (int j = 0; j < m; ++j) params.basis.lambda_m[j] = r.f64();
  } else {
    params.factorized = false;
    params.theta = r.matrix_row_major(params.n, params.k);
  }
  return params;
}

double anll(const StratParams& params, const Dataset& data) {
  validate_params(params);
  if (data.schema.kind != params.base_kind)
    throw std::invalid_argument("dataset base kind differs from the model");
  if (data.schema.n != params.n)
    throw std::invalid_argument("dataset n differs from the model");
  if (data.records.empty()) return std::numeric_limits<double>::quiet_NaN();
  const Eigen::MatrixXd theta = materialize(params);
  double total = 0.0;
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const DataRecord& record = data.records[i];
    if (record.z < 1 || record.z > params.k)
      throw std::invalid_argument("record " + std::to_string(i) + ": z = " +
                                  std::to_string(record.z) + " outside 1.." +
                                  std::to_string(params.k));
    const auto column = theta.col(record.z - 1);
    if (params.base_kind == BaseKind::Logistic) {
      if (record.x.size() != params.n)
        throw std::invalid_argument("record " + std::to_string(i) + ": feature length " +
                                    std::to_string(record.x.size()) + " differs from n");
      const double margin = (2.0 * record.y - 1.0) * record.x.dot(column);
      total += margin > 0.0 ? std::log1p(std::exp(-margin)) : -margin + std::log1p(std::exp(margin));
    } else {
      if (record.y < 1 || record.y > params.n)
        throw std::invalid_argument("record " + std::to_string(i) + ": outcome out of range");
      const double peak = column.maxCoeff();
      const double lse = peak + std::log((column.array() - peak).exp().sum());
      total += lse - column[record.y - 1];
    }
  }
  return total / static_cast<double>(data.records.size());
}

void write_anll_csv(const std::vector<AnllRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out << "split,anll,record_count\n";
  char buf[32];
  for (const AnllRow& row : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", row.anll);
    out << row.split << ',' << buf << ',' << row.record_count << '\n';
  }
  if (!out) throw FormatError("failed writing " + path);
}

}  // namespace esm
