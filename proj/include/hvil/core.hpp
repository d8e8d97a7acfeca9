#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hvil/metric_model.hpp"

namespace hvil {

struct PersonId {
  std::string value;

  auto operator<=>(const PersonId&) const = default;
};

/// One identity-tagged descriptor. Probes and gallery items share the shape.
struct Item {
  std::string item_id;
  PersonId person;
  std::string camera;
  Vector feature;
  std::optional<std::string> image_ref;
};

using Probe = Item;
using GalleryItem = Item;

/// Immutable, indexable collection of items with a cached n×d feature matrix.
class ItemSet {
 public:
  ItemSet() = default;
  explicit ItemSet(std::vector<Item> items);

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  int dim() const { return static_cast<int>(features_.cols()); }

  const Item& operator[](std::size_t i) const { return items_[i]; }
  const Item& at(std::string_view item_id) const;
  std::optional<std::size_t> find(std::string_view item_id) const;

  const Matrix& features() const { return features_; }
  const std::vector<Item>& items() const { return items_; }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

 private:
  std::vector<Item> items_;
  Matrix features_;
  std::unordered_map<std::string, std::size_t> index_;
};

using Gallery = ItemSet;

struct Dataset {
  ItemSet probes;
  ItemSet gallery;
  // Optional pre-view-transform identity coordinates (synthetic data only).
  std::map<PersonId, Vector> ground_truth;

  int dim() const { return gallery.empty() ? probes.dim() : gallery.dim(); }
  // Gallery indices depicting the same person as `probe`.
  std::vector<std::size_t> true_matches(const Item& probe) const;
};

struct RankedEntry {
  std::string item_id;
  std::size_t index = 0;  // position in the gallery ItemSet
  double score = 0.0;
};

/// Gallery ordered by score descending; equal scores are ordered by item_id.
class RankedList {
 public:
  RankedList() = default;
  explicit RankedList(std::vector<RankedEntry> entries);

  std::size_t size() const { return entries_.size(); }
  const RankedEntry& operator[](std::size_t position) const { return entries_[position]; }
  const std::vector<RankedEntry>& entries() const { return entries_; }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  // 0-based display position of a gallery index / item id.
  std::size_t position_of(std::size_t gallery_index) const;
  std::optional<std::size_t> position_of(std::string_view item_id) const;

 private:
  std::vector<RankedEntry> entries_;
  std::vector<std::size_t> position_by_index_;
};

enum class FeedbackLabel { kTrueMatch, kStrongNegative };

std::string_view to_string(FeedbackLabel label);
FeedbackLabel parse_feedback_label(std::string_view text);

struct FeedbackEvent {
  std::string probe_id;
  std::string gallery_item_id;
  FeedbackLabel label = FeedbackLabel::kStrongNegative;
  double wall_time = 0.0;  // seconds since the Unix epoch (or a simulated clock)
  std::size_t rank_at_selection = 0;

  friend bool operator==(const FeedbackEvent&, const FeedbackEvent&) = default;
};

/// Ranking scores f for every gallery item: f_i = -(p - g_i)ᵀ M (p - g_i).
Vector gallery_scores(const Vector& probe, const Gallery& gallery, const Matrix& metric);

RankedList rank_by_scores(const Gallery& gallery, const Vector& scores);
RankedList rank_gallery(const Vector& probe, const Gallery& gallery, const MetricModel& model);

/// Loss rank of item `index`: the number of other items scoring at least as
/// high. Tied items count against each other.
std::size_t loss_rank(const Vector& scores, std::size_t index);

}  // namespace hvil
