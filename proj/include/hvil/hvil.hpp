#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hvil/core.hpp"
#include "hvil/metric_model.hpp"

namespace hvil {

/// Rank-to-loss schedule: alpha_i = 1/i for true matches (steep), and a
/// constant alpha_hat = 1/(n_g - 1) for strong negatives (gentle).
struct LossSchedule {
  std::size_t gallery_size = 0;

  double alpha(std::size_t i) const { return 1.0 / static_cast<double>(i); }
  double alpha_hat(std::size_t /*i*/) const { return 1.0 / static_cast<double>(gallery_size - 1); }
};

double rank_loss(std::size_t rank, FeedbackLabel label, const LossSchedule& schedule);

/// Margin-1 hinge between the selected item's score and another item's.
double hinge_violation(double f_selected, double f_other, FeedbackLabel label);

enum class ViolatorScope {
  kWindow,   // search among the presented top-window_k items
  kGallery,  // search the whole gallery
};

struct HvilConfig {
  double eta = 0.5;
  int max_rounds_per_probe = 3;
  std::size_t window_k = 50;
  double jitter = 1e-10;
  ViolatorScope violator_scope = ViolatorScope::kWindow;
  // Factorize M after every update. Off by default: the update carries a
  // scalar definiteness certificate and factorization is O(d³).
  bool verify_factorization = false;

  void validate() const;
  std::size_t effective_window(std::size_t gallery_size) const;
};

struct Violator {
  std::size_t index = 0;
  std::string item_id;
  double violation = 0.0;
};

/// The candidate (excluding `selected`) with the largest hinge violation;
/// ties go to the lowest item_id. Empty when every violation is zero.
std::optional<Violator> most_violator(const Vector& scores, std::size_t selected, FeedbackLabel label,
                                      const Gallery& gallery, std::span<const std::size_t> candidates);
std::optional<Violator> most_violator(const Vector& probe, std::size_t selected, FeedbackLabel label,
                                      const Gallery& gallery, const MetricModel& model_prev);

struct UpdateContext {
  Vector z;                // probe - selected
  double f_hat = 0.0;      // selected score under the previous model
  double f_v = 0.0;        // most-violator score under the previous model
  double f_t = 0.0;        // selected score under the updated model
  double b = 0.0;          // +1 true match, -1 strong negative
  double loss = 0.0;       // rank loss at the current rank
  std::size_t rank = 0;    // loss rank of the selected item under the previous model
  std::optional<std::string> violator_id;
  bool applied = false;    // false for the zero-loss / no-violator no-op
  bool repaired = false;   // jitter repair was needed
};

struct UpdateResult {
  MetricModel model;
  UpdateContext context;
};

/// Closed-form root of f_t (1 + k (f_t - f_v - b) f_hat) = f_hat with
/// k = eta·loss > 0 and f_hat < 0; the root is the negative one.
double solve_updated_score(double f_hat, double f_v, double b, double eta_loss);

/// Square-root argument of the closed-form root.
double update_discriminant(double f_hat, double f_v, double b, double eta_loss);

/// One online log-det Bregman step with the most-violator loss.
UpdateResult hvil_update(const MetricModel& model_prev, const FeedbackEvent& event, const Item& probe,
                         const Gallery& gallery, const HvilConfig& config);

/// Violator-averaged squared-hinge surrogate over the whole gallery, with the
/// selected item scored under `model_curr` and the others under `model_prev`.
/// Used as a test oracle; the serving path uses the most-violator form.
double approx_loss_full(const Item& probe, std::size_t selected, FeedbackLabel label, const Gallery& gallery,
                        const MetricModel& model_prev, const MetricModel& model_curr);

/// Supplies feedback for one probe. `round` counts from 0.
class FeedbackSource {
 public:
  virtual ~FeedbackSource() = default;
  virtual std::optional<FeedbackEvent> next_feedback(const Item& probe, const RankedList& ranking,
                                                     int round) = 0;
  // Clock used for presentation timestamps (seconds).
  virtual double now();
};

struct ProbeLog {
  std::string probe_id;
  double presented_at = 0.0;
  std::size_t window_k = 0;
  std::vector<FeedbackEvent> events;
};

struct ProbeSessionResult {
  MetricModel model;
  ProbeLog log;
  std::vector<UpdateContext> contexts;
  RankedList initial_ranking;
  RankedList final_ranking;
};

/// Interactive loop for one probe: rank, request feedback, update, repeat
/// until a true match, the round budget, or the source runs dry.
ProbeSessionResult run_probe_session(const MetricModel& model_in, const Item& probe, const Gallery& gallery,
                                     FeedbackSource& source, const HvilConfig& config);

}  // namespace hvil
