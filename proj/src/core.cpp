#include "hvil/core.hpp"

#include <algorithm>
#include <numeric>

#include "hvil/error.hpp"

namespace hvil {

ItemSet::ItemSet(std::vector<Item> items) : items_(std::move(items)) {
  if (items_.empty()) return;
  const auto d = items_.front().feature.size();
  if (d == 0) throw Error(ErrorCode::kDimensionMismatch, "features must be non-empty");
  features_.resize(static_cast<Eigen::Index>(items_.size()), d);
  index_.reserve(items_.size());
  for (std::size_t i = 0; i < items_.size(); ++i) {
    const Item& item = items_[i];
    if (item.feature.size() != d) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "item '" + item.item_id + "' has dimension " + std::to_string(item.feature.size()) +
                      ", expected " + std::to_string(d));
    }
    if (!item.feature.allFinite()) {
      throw Error(ErrorCode::kNonFinite, "item '" + item.item_id + "' has non-finite entries");
    }
    if (!index_.emplace(item.item_id, i).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate item_id '" + item.item_id + "'");
    }
    features_.row(static_cast<Eigen::Index>(i)) = item.feature.transpose();
  }
}

const Item& ItemSet::at(std::string_view item_id) const {
  if (auto i = find(item_id)) return items_[*i];
  throw Error(ErrorCode::kNotFound, "unknown item '" + std::string(item_id) + "'");
}

std::optional<std::size_t> ItemSet::find(std::string_view item_id) const {
  auto it = index_.find(std::string(item_id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::size_t> Dataset::true_matches(const Item& probe) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < gallery.size(); ++i) {
    if (gallery[i].person == probe.person) out.push_back(i);
  }
  return out;
}

RankedList::RankedList(std::vector<RankedEntry> entries) : entries_(std::move(entries)) {
  std::size_t max_index = 0;
  for (const auto& e : entries_) max_index = std::max(max_index, e.index);
  position_by_index_.assign(entries_.empty() ? 0 : max_index + 1, static_cast<std::size_t>(-1));
  for (std::size_t p = 0; p < entries_.size(); ++p) position_by_index_[entries_[p].index] = p;
}

std::size_t RankedList::position_of(std::size_t gallery_index) const {
  if (gallery_index >= position_by_index_.size() ||
      position_by_index_[gallery_index] == static_cast<std::size_t>(-1)) {
    throw Error(ErrorCode::kNotFound, "gallery index not in ranking");
  }
  return position_by_index_[gallery_index];
}

std::optional<std::size_t> RankedList::position_of(std::string_view item_id) const {
  for (std::size_t p = 0; p < entries_.size(); ++p) {
    if (entries_[p].item_id == item_id) return p;
  }
  return std::nullopt;
}

std::string_view to_string(FeedbackLabel label) {
  return label == FeedbackLabel::kTrueMatch ? "true_match" : "strong_negative";
}

FeedbackLabel parse_feedback_label(std::string_view text) {
  if (text == "true_match") return FeedbackLabel::kTrueMatch;
  if (text == "strong_negative") return FeedbackLabel::kStrongNegative;
  throw Error(ErrorCode::kInvalidArgument, "unknown feedback label '" + std::string(text) + "'");
}

Vector gallery_scores(const Vector& probe, const Gallery& gallery, const Matrix& metric) {
  if (probe.size() != metric.rows() || (gallery.size() > 0 && gallery.dim() != metric.rows())) {
    throw Error(ErrorCode::kDimensionMismatch, "feature dimension does not match metric");
  }
  if (gallery.empty()) return Vector();
  const Matrix diffs = gallery.features().rowwise() - probe.transpose();
  return -(diffs * metric).cwiseProduct(diffs).rowwise().sum();
}

RankedList rank_by_scores(const Gallery& gallery, const Vector& scores) {
  std::vector<std::size_t> order(gallery.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return gallery[a].item_id < gallery[b].item_id;
  });
  std::vector<RankedEntry> entries;
  entries.reserve(order.size());
  for (std::size_t i : order) entries.push_back({gallery[i].item_id, i, scores[i]});
  return RankedList(std::move(entries));
}

RankedList rank_gallery(const Vector& probe, const Gallery& gallery, const MetricModel& model) {
  return rank_by_scores(gallery, gallery_scores(probe, gallery, model.matrix()));
}

std::size_t loss_rank(const Vector& scores, std::size_t index) {
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (static_cast<std::size_t>(i) != index && scores[i] >= scores[index]) ++count;
  }
  return count;
}

}  // namespace hvil
