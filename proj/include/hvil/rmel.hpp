#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "hvil/core.hpp"
#include "hvil/metric_model.hpp"

namespace hvil {

/// A human-verified cross-view match: probe and gallery descriptors of one person.
struct VerifiedPair {
  Vector probe;
  Vector gallery;
  PersonId person;
};

using VerifiedPairSet = std::vector<VerifiedPair>;

/// Entry j is the squared Mahalanobis distance under weak model j.
Vector distance_vector(const Vector& probe, const Vector& gallery, std::span<const MetricModel> weak_models);

/// Bilinear ensemble score -dᵀ W d (never positive for PSD W).
double ensemble_score(const Vector& d, const Matrix& w);

/// Target score: 0 for the same identity, -1 otherwise.
double ideal_score(const PersonId& a, const PersonId& b);

/// Training design: one row of D per ordered (probe_i, gallery_j) pair of
/// the verified set, with its ideal score and a same-identity flag.
struct PairDesign {
  Matrix d;                 // pairs × τ
  Vector target;            // ideal scores
  std::vector<char> same;   // c_i == c_j
  std::size_t identities = 0;
};

PairDesign build_pair_design(const VerifiedPairSet& pairs, std::span<const MetricModel> weak_models);

/// ‖F_ens - F*‖² + ν Σ_{same} (-f_ens).
double rmel_objective(const Matrix& w, const PairDesign& design, double nu);
double rmel_objective(const Matrix& w, const VerifiedPairSet& pairs, std::span<const MetricModel> weak_models,
                      double nu);

/// Exact gradient Σ (2 (f* - f_ens) + ν·[same]) d dᵀ.
Matrix rmel_gradient(const Matrix& w, const PairDesign& design, double nu);
Matrix rmel_gradient(const Matrix& w, const VerifiedPairSet& pairs, std::span<const MetricModel> weak_models,
                     double nu);

/// Nearest PSD matrix in Frobenius norm: eigenvalues clamped at zero.
Matrix project_psd(const Matrix& w);

enum class RmelInit {
  kIdentity,
  kScaledIdentity,  // s·I with s the least-squares optimal scale
  kRandomPsd,       // AᵀA / τ with standard-normal A
};

struct RmelConfig {
  double nu = 1000.0;
  // Step as a fraction of 1/L, where L = 2 Σ ‖d‖⁴ bounds the gradient's
  // Lipschitz constant; any value in (0, 1] descends monotonically.
  double step = 1.0;
  int max_iters = 200;
  RmelInit init = RmelInit::kScaledIdentity;
  std::uint64_t seed = 0;
  double tolerance = 1e-8;
  bool diagonal_only = false;

  void validate() const;
};

/// W together with the weak models it combines.
class EnsembleModel {
 public:
  EnsembleModel(Matrix weights, std::vector<MetricModel> weak_models);

  std::size_t tau() const { return weak_.size(); }
  const Matrix& weights() const { return w_; }
  const std::vector<MetricModel>& weak_models() const { return weak_; }
  double min_eigenvalue() const;

  double score(const Vector& probe, const Vector& gallery) const;
  /// Scores for every gallery item, batched across weak models.
  Vector gallery_scores(const Vector& probe, const Gallery& gallery) const;

  // RME1: magic, u32 τ, τ×τ float64 row-major, τ embedded HVM1 blocks.
  void write(std::ostream& out) const;
  static EnsembleModel read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static EnsembleModel load(const std::filesystem::path& path);

  friend bool operator==(const EnsembleModel& a, const EnsembleModel& b) {
    return a.w_.rows() == b.w_.rows() && a.w_ == b.w_ && a.weak_ == b.weak_;
  }

 private:
  Matrix w_;
  std::vector<MetricModel> weak_;
};

struct RmelTrace {
  double objective_init = 0.0;
  double objective_final = 0.0;
  double lipschitz = 0.0;
  double min_eigenvalue = 0.0;
  int iterations = 0;
  std::size_t pairs = 0;
};

struct RmelResult {
  EnsembleModel model;
  RmelTrace trace;
};

RmelResult train_rmel(const VerifiedPairSet& pairs, std::vector<MetricModel> weak_models, const RmelConfig& config);

RankedList hol_rank(const Vector& probe, const Gallery& gallery, const EnsembleModel& ensemble);

/// Element-wise mean of the weak models.
MetricModel average_ensemble(std::span<const MetricModel> weak_models);

}  // namespace hvil
