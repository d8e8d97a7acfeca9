#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <iosfwd>

namespace hvil {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// True when a symmetric Cholesky factorization of `m` succeeds.
bool admits_cholesky(const Matrix& m);

/// A d×d symmetric positive-definite Mahalanobis matrix M. The ranking
/// function it induces is f(p, g) = -(p - g)ᵀ M (p - g).
///
/// Models are values: every update produces a new model. The public
/// constructor validates symmetry (1e-10), finiteness and positive
/// definiteness; `trusted` skips the O(d³) factorization for matrices whose
/// definiteness is certified by the caller.
class MetricModel {
 public:
  static MetricModel identity(int dim);
  static MetricModel trusted(Matrix m, std::uint64_t update_count);

  explicit MetricModel(Matrix m, std::uint64_t update_count = 0);

  int dim() const { return static_cast<int>(m_.rows()); }
  const Matrix& matrix() const { return m_; }
  std::uint64_t update_count() const { return update_count_; }

  /// Negative squared Mahalanobis distance between two descriptors.
  double score(const Vector& a, const Vector& b) const;

  bool is_positive_definite() const { return admits_cholesky(m_); }

  // HVM1: magic, u32 d, d×d float64 row-major, u64 update counter.
  void write(std::ostream& out) const;
  static MetricModel read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static MetricModel load(const std::filesystem::path& path);

  friend bool operator==(const MetricModel& a, const MetricModel& b) {
    return a.update_count_ == b.update_count_ && a.m_.rows() == b.m_.rows() && a.m_ == b.m_;
  }

 private:
  MetricModel() = default;

  Matrix m_;
  std::uint64_t update_count_ = 0;
};

}  // namespace hvil
