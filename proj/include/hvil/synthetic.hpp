#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "hvil/core.hpp"
#include "hvil/dataset_io.hpp"

namespace hvil {

/// Two-view synthetic identities. Each identity has a centroid c ~ N(0, I);
/// view v observes T_v c + noise, with T_v = I + scale·U G_v Uᵀ a
/// view-specific distortion on a shared rank-r subspace U. Noise is isotropic
/// (sigma) plus a stronger nuisance component inside U (sigma·strength), so
/// plain L2 is misled along U while a learned metric can suppress it.
struct SyntheticSpec {
  int n_identities = 300;
  int dim = 64;
  int nuisance_rank = 8;
  double transform_scale = 1.0;
  double sigma = 0.3;
  double nuisance_strength = 8.0;
  int probe_shots = 1;    // view A
  int gallery_shots = 1;  // view B
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticData {
  std::vector<FeatureRecord> features;
  std::vector<MetadataRow> metadata;
  std::map<PersonId, Vector> ground_truth;

  Dataset to_dataset(bool normalize = true) const;
  /// Writes features.rfv, metadata.csv and ground_truth.csv.
  void write(const std::filesystem::path& dir) const;
};

SyntheticData gen_synthetic(const SyntheticSpec& spec);

}  // namespace hvil
