#include "hvil/metric_model.hpp"

#include <fstream>

#include "hvil/binary_io.hpp"
#include "hvil/error.hpp"

namespace hvil {

namespace {

constexpr std::string_view kMagic = "HVM1";

void validate(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw Error(ErrorCode::kDimensionMismatch, "metric matrix must be square and non-empty");
  }
  if (!m.allFinite()) throw Error(ErrorCode::kNonFinite, "metric matrix has non-finite entries");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw Error(ErrorCode::kInvalidArgument, "metric matrix is not symmetric");
  }
  if (!admits_cholesky(m)) {
    throw Error(ErrorCode::kNotPositiveDefinite, "metric matrix is not positive definite");
  }
}

}  // namespace

bool admits_cholesky(const Matrix& m) {
  if (m.rows() != m.cols() || !m.allFinite()) return false;
  Eigen::LLT<Matrix> llt(m);
  return llt.info() == Eigen::Success;
}

MetricModel MetricModel::identity(int dim) {
  if (dim <= 0) throw Error(ErrorCode::kInvalidArgument, "metric dimension must be positive");
  return trusted(Matrix::Identity(dim, dim), 0);
}

MetricModel MetricModel::trusted(Matrix m, std::uint64_t update_count) {
  MetricModel model;
  model.m_ = std::move(m);
  model.update_count_ = update_count;
  return model;
}

MetricModel::MetricModel(Matrix m, std::uint64_t update_count)
    : m_(std::move(m)), update_count_(update_count) {
  validate(m_);
}

double MetricModel::score(const Vector& a, const Vector& b) const {
  if (a.size() != m_.rows() || b.size() != m_.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "feature dimension does not match metric");
  }
  const Vector z = a - b;
  return -z.dot(m_ * z);
}

void MetricModel::write(std::ostream& out) const {
  binary::write_magic(out, kMagic);
  binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(m_.rows()));
  for (Eigen::Index i = 0; i < m_.rows(); ++i) {
    for (Eigen::Index j = 0; j < m_.cols(); ++j) binary::write_le<double>(out, m_(i, j));
  }
  binary::write_le<std::uint64_t>(out, update_count_);
}

MetricModel MetricModel::read(std::istream& in) {
  binary::expect_magic(in, kMagic);
  const auto d = binary::read_le<std::uint32_t>(in);
  if (d == 0) throw Error(ErrorCode::kMalformedHeader, "HVM1 dimension is zero");
  Matrix m(d, d);
  for (std::uint32_t i = 0; i < d; ++i) {
    for (std::uint32_t j = 0; j < d; ++j) m(i, j) = binary::read_le<double>(in);
  }
  const auto updates = binary::read_le<std::uint64_t>(in);
  return MetricModel(std::move(m), updates);
}

void MetricModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  write(out);
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

MetricModel MetricModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot open " + path.string());
  return read(in);
}

}  // namespace hvil
