#include "hvil/rmel.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "hvil/binary_io.hpp"
#include "hvil/error.hpp"

namespace hvil {

namespace {

void check_weak_models(std::span<const MetricModel> weak_models, int dim) {
  if (weak_models.empty()) throw Error(ErrorCode::kInvalidArgument, "ensemble needs at least one weak model");
  for (const auto& m : weak_models) {
    if (m.dim() != dim) throw Error(ErrorCode::kDimensionMismatch, "weak model dimension mismatch");
  }
}

// Squared distances between every row of `p` and every row of `g` under
// `m`, via pᵀMp - 2 pᵀMg + gᵀMg. Rounding can leave tiny negatives; those
// are clamped since the exact value is nonnegative.
Matrix pairwise_distances(const Matrix& p, const Matrix& g, const Matrix& m) {
  const Matrix pm = p * m;
  const Vector pq = (pm.array() * p.array()).rowwise().sum();
  const Vector gq = ((g * m).array() * g.array()).rowwise().sum();
  Matrix out = -2.0 * pm * g.transpose();
  out.colwise() += pq;
  out.rowwise() += gq.transpose();
  return out.cwiseMax(0.0);
}

// Ensemble scores for every (probe row, gallery row) pair.
Matrix ensemble_score_matrix(const Matrix& p, const Matrix& g, const Matrix& w,
                             std::span<const MetricModel> weak_models) {
  const auto tau = static_cast<Eigen::Index>(weak_models.size());
  std::vector<Matrix> dist;
  dist.reserve(weak_models.size());
  for (const auto& m : weak_models) dist.push_back(pairwise_distances(p, g, m.matrix()));
  Matrix out(p.rows(), g.rows());
  Vector d(tau);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.rows(); ++j) {
      for (Eigen::Index k = 0; k < tau; ++k) d[k] = dist[static_cast<std::size_t>(k)](i, j);
      out(i, j) = -d.dot(w * d);
    }
  }
  return out;
}

Vector pair_scores(const Matrix& w, const PairDesign& design) {
  return -((design.d * w).array() * design.d.array()).rowwise().sum();
}

double objective_from_scores(const Vector& f, const PairDesign& design, double nu) {
  double reg = 0.0;
  for (Eigen::Index k = 0; k < f.size(); ++k) {
    if (design.same[static_cast<std::size_t>(k)]) reg -= f[k];
  }
  return (f - design.target).squaredNorm() + nu * reg;
}

Matrix gradient_from_scores(const Vector& f, const PairDesign& design, double nu) {
  Vector weight = 2.0 * (design.target - f);
  for (Eigen::Index k = 0; k < f.size(); ++k) {
    if (design.same[static_cast<std::size_t>(k)]) weight[k] += nu;
  }
  Matrix grad = design.d.transpose() * weight.asDiagonal() * design.d;
  return 0.5 * (grad + grad.transpose());
}

}  // namespace

Vector distance_vector(const Vector& probe, const Vector& gallery, std::span<const MetricModel> weak_models) {
  check_weak_models(weak_models, static_cast<int>(probe.size()));
  if (gallery.size() != probe.size()) throw Error(ErrorCode::kDimensionMismatch, "descriptor dimension mismatch");
  Vector d(static_cast<Eigen::Index>(weak_models.size()));
  for (std::size_t j = 0; j < weak_models.size(); ++j) {
    d[static_cast<Eigen::Index>(j)] = -weak_models[j].score(probe, gallery);
  }
  return d;
}

double ensemble_score(const Vector& d, const Matrix& w) {
  if (w.rows() != d.size() || w.cols() != d.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "weight matrix does not match distance vector");
  }
  return -d.dot(w * d);
}

double ideal_score(const PersonId& a, const PersonId& b) { return a == b ? 0.0 : -1.0; }

PairDesign build_pair_design(const VerifiedPairSet& pairs, std::span<const MetricModel> weak_models) {
  if (pairs.empty()) throw Error(ErrorCode::kDegenerateInput, "no verified pairs");
  const auto n = static_cast<Eigen::Index>(pairs.size());
  const auto dim = pairs.front().probe.size();
  check_weak_models(weak_models, static_cast<int>(dim));
  Matrix p(n, dim), g(n, dim);
  std::set<PersonId> identities;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& pair = pairs[static_cast<std::size_t>(i)];
    if (pair.probe.size() != dim || pair.gallery.size() != dim) {
      throw Error(ErrorCode::kDimensionMismatch, "verified pair dimension mismatch");
    }
    p.row(i) = pair.probe.transpose();
    g.row(i) = pair.gallery.transpose();
    identities.insert(pair.person);
  }

  PairDesign design;
  design.identities = identities.size();
  const auto tau = static_cast<Eigen::Index>(weak_models.size());
  design.d.resize(n * n, tau);
  for (Eigen::Index k = 0; k < tau; ++k) {
    const Matrix dist = pairwise_distances(p, g, weak_models[static_cast<std::size_t>(k)].matrix());
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) design.d(i * n + j, k) = dist(i, j);
    }
  }
  design.target.resize(n * n);
  design.same.resize(static_cast<std::size_t>(n * n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& a = pairs[static_cast<std::size_t>(i)].person;
      const auto& b = pairs[static_cast<std::size_t>(j)].person;
      design.target[i * n + j] = ideal_score(a, b);
      design.same[static_cast<std::size_t>(i * n + j)] = a == b;
    }
  }
  return design;
}

double rmel_objective(const Matrix& w, const PairDesign& design, double nu) {
  return objective_from_scores(pair_scores(w, design), design, nu);
}

double rmel_objective(const Matrix& w, const VerifiedPairSet& pairs, std::span<const MetricModel> weak_models,
                      double nu) {
  return rmel_objective(w, build_pair_design(pairs, weak_models), nu);
}

Matrix rmel_gradient(const Matrix& w, const PairDesign& design, double nu) {
  return gradient_from_scores(pair_scores(w, design), design, nu);
}

Matrix rmel_gradient(const Matrix& w, const VerifiedPairSet& pairs, std::span<const MetricModel> weak_models,
                     double nu) {
  return rmel_gradient(w, build_pair_design(pairs, weak_models), nu);
}

Matrix project_psd(const Matrix& w) {
  const Matrix sym = 0.5 * (w + w.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() != Eigen::Success) throw Error(ErrorCode::kNumericalBlowup, "eigendecomposition failed");
  const Vector lambda = eig.eigenvalues().cwiseMax(0.0);
  Matrix out = eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

void RmelConfig::validate() const {
  if (!(nu >= 0.0) || !std::isfinite(nu)) throw Error(ErrorCode::kInvalidArgument, "nu must be >= 0");
  if (!(step > 0.0) || !std::isfinite(step)) throw Error(ErrorCode::kInvalidArgument, "step must be > 0");
  if (max_iters < 0) throw Error(ErrorCode::kInvalidArgument, "max_iters must be >= 0");
  if (!(tolerance >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "tolerance must be >= 0");
}

EnsembleModel::EnsembleModel(Matrix weights, std::vector<MetricModel> weak_models)
    : w_(std::move(weights)), weak_(std::move(weak_models)) {
  const auto tau = static_cast<Eigen::Index>(weak_.size());
  if (tau == 0) throw Error(ErrorCode::kInvalidArgument, "ensemble needs at least one weak model");
  if (w_.rows() != tau || w_.cols() != tau) {
    throw Error(ErrorCode::kDimensionMismatch, "weight matrix must be tau x tau");
  }
  check_weak_models(weak_, weak_.front().dim());
  if (!w_.allFinite()) throw Error(ErrorCode::kNonFinite, "non-finite ensemble weights");
}

double EnsembleModel::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (w_ + w_.transpose()), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

double EnsembleModel::score(const Vector& probe, const Vector& gallery) const {
  return ensemble_score(distance_vector(probe, gallery, weak_), w_);
}

Vector EnsembleModel::gallery_scores(const Vector& probe, const Gallery& gallery) const {
  if (probe.size() != weak_.front().dim() || gallery.dim() != weak_.front().dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "descriptor dimension does not match ensemble");
  }
  const Matrix p = probe.transpose();
  return ensemble_score_matrix(p, gallery.features(), w_, weak_).row(0).transpose();
}

void EnsembleModel::write(std::ostream& out) const {
  binary::write_magic(out, "RME1");
  binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(tau()));
  for (Eigen::Index i = 0; i < w_.rows(); ++i) {
    for (Eigen::Index j = 0; j < w_.cols(); ++j) binary::write_le<double>(out, w_(i, j));
  }
  for (const auto& m : weak_) m.write(out);
}

EnsembleModel EnsembleModel::read(std::istream& in) {
  binary::expect_magic(in, "RME1");
  const auto tau = binary::read_le<std::uint32_t>(in);
  if (tau == 0) throw Error(ErrorCode::kMalformedHeader, "RME1 with zero weak models");
  Matrix w(tau, tau);
  for (std::uint32_t i = 0; i < tau; ++i) {
    for (std::uint32_t j = 0; j < tau; ++j) w(i, j) = binary::read_le<double>(in);
  }
  std::vector<MetricModel> weak;
  weak.reserve(tau);
  for (std::uint32_t k = 0; k < tau; ++k) weak.push_back(MetricModel::read(in));
  return EnsembleModel(std::move(w), std::move(weak));
}

void EnsembleModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  write(out);
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

EnsembleModel EnsembleModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot open " + path.string());
  return read(in);
}

RmelResult train_rmel(const VerifiedPairSet& pairs, std::vector<MetricModel> weak_models, const RmelConfig& config) {
  config.validate();
  const PairDesign design = build_pair_design(pairs, weak_models);
  if (design.identities < 2) {
    throw Error(ErrorCode::kDegenerateInput, "ensemble training needs at least 2 verified identities");
  }
  const auto tau = static_cast<Eigen::Index>(weak_models.size());
  const Vector sq = design.d.rowwise().squaredNorm();

  Matrix w;
  switch (config.init) {
    case RmelInit::kIdentity:
      w = Matrix::Identity(tau, tau);
      break;
    case RmelInit::kScaledIdentity: {
      // Minimizes the objective over W = s·I, s >= 0: with g = ‖d‖²,
      // s = (-Σ f* g - ν/2 Σ_same g) / Σ g².
      double num = 0.0, den = 0.0;
      for (Eigen::Index k = 0; k < sq.size(); ++k) {
        num -= design.target[k] * sq[k];
        if (design.same[static_cast<std::size_t>(k)]) num -= 0.5 * config.nu * sq[k];
        den += sq[k] * sq[k];
      }
      const double s = den > 0.0 ? std::max(0.0, num / den) : 1.0;
      w = s * Matrix::Identity(tau, tau);
      break;
    }
    case RmelInit::kRandomPsd: {
      std::mt19937_64 rng(config.seed);
      std::normal_distribution<double> normal;
      Matrix a(tau, tau);
      for (Eigen::Index i = 0; i < tau; ++i) {
        for (Eigen::Index j = 0; j < tau; ++j) a(i, j) = normal(rng);
      }
      w = a.transpose() * a / static_cast<double>(tau);
      break;
    }
  }
  if (config.diagonal_only) w = Matrix(w.diagonal().asDiagonal());

  RmelTrace trace;
  trace.pairs = static_cast<std::size_t>(design.d.rows());
  trace.lipschitz = 2.0 * sq.squaredNorm();
  const double eps = trace.lipschitz > 0.0 ? config.step / trace.lipschitz : config.step;

  Vector f = pair_scores(w, design);
  double objective = objective_from_scores(f, design, config.nu);
  trace.objective_init = objective;
  for (int it = 0; it < config.max_iters; ++it) {
    Matrix grad = gradient_from_scores(f, design, config.nu);
    if (config.diagonal_only) grad = Matrix(grad.diagonal().asDiagonal());
    Matrix next = config.diagonal_only ? Matrix((w - eps * grad).diagonal().cwiseMax(0.0).asDiagonal())
                                       : project_psd(w - eps * grad);
    if (!next.allFinite()) throw Error(ErrorCode::kNumericalBlowup, "ensemble weights diverged");
    f = pair_scores(next, design);
    const double next_objective = objective_from_scores(f, design, config.nu);
    w = std::move(next);
    ++trace.iterations;
    const double improvement = objective - next_objective;
    objective = next_objective;
    if (improvement < config.tolerance) break;
  }
  trace.objective_final = objective;
  EnsembleModel model(std::move(w), std::move(weak_models));
  trace.min_eigenvalue = model.min_eigenvalue();
  return {std::move(model), trace};
}

RankedList hol_rank(const Vector& probe, const Gallery& gallery, const EnsembleModel& ensemble) {
  return rank_by_scores(gallery, ensemble.gallery_scores(probe, gallery));
}

MetricModel average_ensemble(std::span<const MetricModel> weak_models) {
  if (weak_models.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot average zero models");
  check_weak_models(weak_models, weak_models.front().dim());
  Matrix sum = Matrix::Zero(weak_models.front().dim(), weak_models.front().dim());
  for (const auto& m : weak_models) sum += m.matrix();
  sum /= static_cast<double>(weak_models.size());
  return MetricModel(0.5 * (sum + sum.transpose()));
}

}  // namespace hvil
