#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hvil/core.hpp"

namespace hvil {

struct FeatureRecord {
  std::string item_id;
  std::vector<float> values;
};

struct MetadataRow {
  std::string item_id;
  std::string person_id;
  std::string camera_id;
  std::string role;  // "probe" | "gallery"
  std::string image_ref;
};

// Feature files: RFV1 binary (magic, u32 d, u64 n, n × (u32 len, id, d × f32))
// or plain CSV rows `item_id,v1,...,vd` with an optional header row.
std::vector<FeatureRecord> read_features(const std::filesystem::path& path);
void write_features_rfv1(const std::filesystem::path& path, const std::vector<FeatureRecord>& records);
void write_features_csv(const std::filesystem::path& path, const std::vector<FeatureRecord>& records);

// Header `item_id,person_id,camera_id,role,image_ref`.
std::vector<MetadataRow> read_metadata(const std::filesystem::path& path);
void write_metadata(const std::filesystem::path& path, const std::vector<MetadataRow>& rows);

// Header `person_id,v1,...,vd`: identity coordinates before the view transform.
std::map<PersonId, Vector> read_ground_truth(const std::filesystem::path& path);
void write_ground_truth(const std::filesystem::path& path, const std::map<PersonId, Vector>& truth);

std::vector<std::string> split_csv_line(const std::string& line);

/// Joins features with metadata into probe and gallery sets. With `normalize`
/// every feature is scaled to unit Euclidean norm.
Dataset load_dataset(const std::filesystem::path& features_path,
                     const std::filesystem::path& metadata_path, bool normalize);

/// In-memory form of load_dataset.
Dataset assemble_dataset(const std::vector<FeatureRecord>& records, const std::vector<MetadataRow>& rows,
                         bool normalize);

/// Loads `features.rfv` (or `features.csv`), `metadata.csv` and, when
/// present, `ground_truth.csv` from a dataset directory.
Dataset load_dataset_dir(const std::filesystem::path& dir, bool normalize);

}  // namespace hvil
