#include "hvil/hvil.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "hvil/error.hpp"

namespace hvil {

namespace {

// Below this ratio f_t / f_hat the rank-one certificate is numerically
// meaningless and the update falls back to an explicit factorization.
constexpr double kCertificateFloor = 1e-12;
// Relative mismatch between -zᵀM_t z and f_t beyond which rounding is
// considered to have swamped the rank-one update.
constexpr double kResidualTolerance = 1e-6;

std::vector<std::size_t> top_window(const RankedList& ranking, std::size_t k) {
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t p = 0; p < k && p < ranking.size(); ++p) out.push_back(ranking[p].index);
  return out;
}

}  // namespace

double rank_loss(std::size_t rank, FeedbackLabel label, const LossSchedule& schedule) {
  const std::size_t n = schedule.gallery_size;
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "loss schedule needs a gallery of at least 2");
  if (rank > n - 1) {
    throw Error(ErrorCode::kRankOutOfRange,
                "rank " + std::to_string(rank) + " outside [0, " + std::to_string(n - 1) + "]");
  }
  double sum = 0.0;
  if (label == FeedbackLabel::kTrueMatch) {
    for (std::size_t i = 1; i <= rank; ++i) sum += schedule.alpha(i);
  } else {
    for (std::size_t i = rank + 1; i <= n; ++i) sum += schedule.alpha_hat(i);
  }
  return sum;
}

double hinge_violation(double f_selected, double f_other, FeedbackLabel label) {
  const double margin = label == FeedbackLabel::kTrueMatch ? 1.0 - f_selected + f_other
                                                           : 1.0 - f_other + f_selected;
  return std::max(0.0, margin);
}

void HvilConfig::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw Error(ErrorCode::kInvalidArgument, "eta must be > 0");
  if (max_rounds_per_probe < 1) throw Error(ErrorCode::kInvalidArgument, "max_rounds_per_probe must be >= 1");
  if (window_k < 1) throw Error(ErrorCode::kInvalidArgument, "window_k must be >= 1");
  if (!(jitter >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "jitter must be >= 0");
}

std::size_t HvilConfig::effective_window(std::size_t gallery_size) const {
  return std::min(window_k, gallery_size);
}

std::optional<Violator> most_violator(const Vector& scores, std::size_t selected, FeedbackLabel label,
                                      const Gallery& gallery, std::span<const std::size_t> candidates) {
  std::optional<Violator> best;
  for (std::size_t i : candidates) {
    if (i == selected) continue;
    const double h = hinge_violation(scores[static_cast<Eigen::Index>(selected)],
                                     scores[static_cast<Eigen::Index>(i)], label);
    if (h <= 0.0) continue;
    if (!best || h > best->violation ||
        (h == best->violation && gallery[i].item_id < best->item_id)) {
      best = Violator{i, gallery[i].item_id, h};
    }
  }
  return best;
}

std::optional<Violator> most_violator(const Vector& probe, std::size_t selected, FeedbackLabel label,
                                      const Gallery& gallery, const MetricModel& model_prev) {
  if (selected >= gallery.size()) throw Error(ErrorCode::kNotFound, "selected item outside gallery");
  const Vector scores = gallery_scores(probe, gallery, model_prev.matrix());
  std::vector<std::size_t> all(gallery.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return most_violator(scores, selected, label, gallery, all);
}

double update_discriminant(double f_hat, double f_v, double b, double eta_loss) {
  const double a = eta_loss * (f_v + b) * f_hat - 1.0;
  return a * a + 4.0 * eta_loss * f_hat * f_hat;
}

double solve_updated_score(double f_hat, double f_v, double b, double eta_loss) {
  // Quadratic A f² + B f + C = 0 with A = k f_hat, B = 1 - k (f_v + b) f_hat,
  // C = -f_hat; the admissible root is (-B + sqrt(disc)) / (2A). For B > 0
  // the algebraically equal form 2 f_hat / (B + sqrt(disc)) avoids
  // cancellation and stays finite as A -> 0.
  const double a = eta_loss * f_hat;
  const double b_coef = 1.0 - eta_loss * (f_v + b) * f_hat;
  const double root = std::sqrt(update_discriminant(f_hat, f_v, b, eta_loss));
  if (b_coef > 0.0) return 2.0 * f_hat / (b_coef + root);
  return (-b_coef + root) / (2.0 * a);
}

UpdateResult hvil_update(const MetricModel& model_prev, const FeedbackEvent& event, const Item& probe,
                         const Gallery& gallery, const HvilConfig& config) {
  config.validate();
  if (gallery.size() < 2) throw Error(ErrorCode::kInvalidArgument, "gallery needs at least 2 items");
  if (probe.feature.size() != model_prev.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "probe dimension does not match metric");
  }
  const auto found = gallery.find(event.gallery_item_id);
  if (!found) throw Error(ErrorCode::kNotFound, "unknown gallery item '" + event.gallery_item_id + "'");
  const std::size_t sel = *found;
  const Matrix& m = model_prev.matrix();

  const Vector scores = gallery_scores(probe.feature, gallery, m);
  const RankedList ranking = rank_by_scores(gallery, scores);
  const std::size_t window = config.effective_window(gallery.size());
  if (ranking.position_of(sel) >= window) {
    throw Error(ErrorCode::kOutOfWindow, "item '" + event.gallery_item_id + "' is outside the top-" +
                                             std::to_string(window) + " window");
  }

  UpdateContext ctx;
  ctx.z = probe.feature - gallery[sel].feature;
  ctx.f_hat = scores[static_cast<Eigen::Index>(sel)];
  ctx.b = event.label == FeedbackLabel::kTrueMatch ? 1.0 : -1.0;
  ctx.rank = loss_rank(scores, sel);
  ctx.loss = rank_loss(ctx.rank, event.label, LossSchedule{gallery.size()});
  ctx.f_t = ctx.f_hat;

  if (ctx.loss == 0.0 || ctx.f_hat == 0.0) return {model_prev, std::move(ctx)};

  std::optional<Violator> violator;
  if (config.violator_scope == ViolatorScope::kWindow) {
    violator = most_violator(scores, sel, event.label, gallery, top_window(ranking, window));
  } else {
    violator = most_violator(scores, sel, event.label, gallery, top_window(ranking, gallery.size()));
  }
  if (!violator) return {model_prev, std::move(ctx)};

  ctx.violator_id = violator->item_id;
  ctx.f_v = scores[static_cast<Eigen::Index>(violator->index)];
  const double eta_loss = config.eta * ctx.loss;
  ctx.f_t = solve_updated_score(ctx.f_hat, ctx.f_v, ctx.b, eta_loss);
  const double c = eta_loss * (ctx.f_t - ctx.f_v - ctx.b);
  // M_t = (M⁻¹ - c z zᵀ)⁻¹ = M + c (Mz)(Mz)ᵀ / (1 + c f_hat), and
  // 1 + c f_hat = f_hat / f_t.
  const double beta = c * ctx.f_t / ctx.f_hat;
  if (!std::isfinite(ctx.f_t) || !std::isfinite(beta)) {
    throw Error(ErrorCode::kNumericalBlowup, "non-finite update coefficient");
  }

  const Vector u = m * ctx.z;
  Matrix next = m;
  next.noalias() += beta * u * u.transpose();
  next = 0.5 * (next + next.transpose()).eval();
  if (!next.allFinite()) throw Error(ErrorCode::kNumericalBlowup, "non-finite metric after update");

  const double residual = std::abs(-ctx.z.dot(next * ctx.z) - ctx.f_t);
  const bool certified = ctx.f_t < 0.0 && ctx.f_t / ctx.f_hat > kCertificateFloor &&
                         residual <= kResidualTolerance * std::abs(ctx.f_t);
  if (!certified || config.verify_factorization) {
    if (!admits_cholesky(next)) {
      next.diagonal().array() += config.jitter;
      ctx.repaired = true;
      if (!admits_cholesky(next)) {
        throw Error(ErrorCode::kNotPositiveDefinite, "update lost positive definiteness after jitter repair");
      }
    }
  }
  ctx.applied = true;
  return {MetricModel::trusted(std::move(next), model_prev.update_count() + 1), std::move(ctx)};
}

double approx_loss_full(const Item& probe, std::size_t selected, FeedbackLabel label, const Gallery& gallery,
                        const MetricModel& model_prev, const MetricModel& model_curr) {
  const Vector prev_scores = gallery_scores(probe.feature, gallery, model_prev.matrix());
  const double loss = rank_loss(loss_rank(prev_scores, selected), label, LossSchedule{gallery.size()});
  const double f_selected = model_curr.score(probe.feature, gallery[selected].feature);
  double sum = 0.0;
  std::size_t violators = 0;
  for (std::size_t i = 0; i < gallery.size(); ++i) {
    if (i == selected) continue;
    const double h = hinge_violation(f_selected, prev_scores[static_cast<Eigen::Index>(i)], label);
    if (h > 0.0) {
      sum += loss * h * h;
      ++violators;
    }
  }
  return violators == 0 ? 0.0 : sum / static_cast<double>(violators);
}

double FeedbackSource::now() {
  using namespace std::chrono;
  return duration<double>(system_clock::now().time_since_epoch()).count();
}

ProbeSessionResult run_probe_session(const MetricModel& model_in, const Item& probe, const Gallery& gallery,
                                     FeedbackSource& source, const HvilConfig& config) {
  config.validate();
  ProbeSessionResult result{model_in, {}, {}, {}, {}};
  result.log.probe_id = probe.item_id;
  result.log.window_k = config.effective_window(gallery.size());
  result.log.presented_at = source.now();

  RankedList ranking = rank_gallery(probe.feature, gallery, result.model);
  result.initial_ranking = ranking;
  for (int round = 0; round < config.max_rounds_per_probe; ++round) {
    auto event = source.next_feedback(probe, ranking, round);
    if (!event) break;
    const auto position = ranking.position_of(event->gallery_item_id);
    if (!position) throw Error(ErrorCode::kNotFound, "unknown gallery item '" + event->gallery_item_id + "'");
    if (*position >= result.log.window_k) {
      throw Error(ErrorCode::kOutOfWindow, "feedback on item '" + event->gallery_item_id + "' at position " +
                                               std::to_string(*position) + " outside the window");
    }
    auto step = hvil_update(result.model, *event, probe, gallery, config);
    result.model = std::move(step.model);
    result.contexts.push_back(std::move(step.context));
    result.log.events.push_back(*event);
    ranking = rank_gallery(probe.feature, gallery, result.model);
    if (event->label == FeedbackLabel::kTrueMatch) break;
  }
  result.final_ranking = std::move(ranking);
  return result;
}

}  // namespace hvil
