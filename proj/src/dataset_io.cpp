#include "hvil/dataset_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "hvil/binary_io.hpp"
#include "hvil/error.hpp"

namespace hvil {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kFeatureMagic = "RFV1";
constexpr std::string_view kMetadataHeader = "item_id,person_id,camera_id,role,image_ref";

std::string trim_cr(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.pop_back();
  return s;
}

double parse_number(const std::string& text, const fs::path& path, std::size_t line_no) {
  std::size_t consumed = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &consumed);
  } catch (const std::exception&) {
    throw Error(ErrorCode::kMalformedHeader,
                path.string() + ":" + std::to_string(line_no) + ": not a number '" + text + "'");
  }
  if (consumed != text.size()) {
    throw Error(ErrorCode::kMalformedHeader,
                path.string() + ":" + std::to_string(line_no) + ": trailing characters in '" + text + "'");
  }
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::kNonFinite, path.string() + ":" + std::to_string(line_no) + ": non-finite value");
  }
  return value;
}

std::vector<FeatureRecord> read_rfv1(std::istream& in, const fs::path& path) {
  binary::expect_magic(in, kFeatureMagic);
  const auto d = binary::read_le<std::uint32_t>(in);
  const auto n = binary::read_le<std::uint64_t>(in);
  if (d == 0) throw Error(ErrorCode::kMalformedHeader, path.string() + ": zero feature dimension");
  std::vector<FeatureRecord> records;
  records.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, 1u << 20)));
  for (std::uint64_t r = 0; r < n; ++r) {
    const auto len = binary::read_le<std::uint32_t>(in);
    FeatureRecord rec;
    rec.item_id.resize(len);
    if (!in.read(rec.item_id.data(), len)) throw Error(ErrorCode::kIo, path.string() + ": truncated record");
    rec.values.resize(d);
    for (std::uint32_t j = 0; j < d; ++j) {
      rec.values[j] = binary::read_le<float>(in);
      if (!std::isfinite(rec.values[j])) {
        throw Error(ErrorCode::kNonFinite, path.string() + ": non-finite value in '" + rec.item_id + "'");
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<FeatureRecord> read_feature_csv(std::istream& in, const fs::path& path) {
  std::vector<FeatureRecord> records;
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim_cr(line);
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (line_no == 1 && fields.front() == "item_id") continue;
    if (fields.size() < 2) {
      throw Error(ErrorCode::kMalformedHeader, path.string() + ":" + std::to_string(line_no) + ": no values");
    }
    FeatureRecord rec;
    rec.item_id = fields.front();
    for (std::size_t j = 1; j < fields.size(); ++j) {
      rec.values.push_back(static_cast<float>(parse_number(fields[j], path, line_no)));
    }
    if (dim == 0) dim = rec.values.size();
    if (rec.values.size() != dim) {
      throw Error(ErrorCode::kDimensionMismatch, path.string() + ":" + std::to_string(line_no) +
                                                     ": dimension " + std::to_string(rec.values.size()) +
                                                     " differs from " + std::to_string(dim));
    }
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        current += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        current += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current += c;
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

std::vector<FeatureRecord> read_features(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot open feature file " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  const bool binary = in.gcount() == 4 && std::string_view(magic, 4) == kFeatureMagic;
  in.clear();
  in.seekg(0);
  return binary ? read_rfv1(in, path) : read_feature_csv(in, path);
}

void write_features_rfv1(const fs::path& path, const std::vector<FeatureRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  const std::uint32_t d = records.empty() ? 0 : static_cast<std::uint32_t>(records.front().values.size());
  binary::write_magic(out, kFeatureMagic);
  binary::write_le<std::uint32_t>(out, d);
  binary::write_le<std::uint64_t>(out, records.size());
  for (const auto& rec : records) {
    if (rec.values.size() != d) throw Error(ErrorCode::kDimensionMismatch, "mixed feature dimensions");
    binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(rec.item_id.size()));
    out.write(rec.item_id.data(), static_cast<std::streamsize>(rec.item_id.size()));
    for (float v : rec.values) binary::write_le<float>(out, v);
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

void write_features_csv(const fs::path& path, const std::vector<FeatureRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  char buf[32];
  for (const auto& rec : records) {
    out << rec.item_id;
    for (float v : rec.values) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      out << ',' << std::string_view(buf, static_cast<std::size_t>(end - buf));
    }
    out << '\n';
  }
}

std::vector<MetadataRow> read_metadata(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot open metadata file " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim_cr(line) != kMetadataHeader) {
    throw Error(ErrorCode::kMalformedHeader,
                path.string() + ": expected header '" + std::string(kMetadataHeader) + "'");
  }
  std::vector<MetadataRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim_cr(line);
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() == 4) f.emplace_back();
    if (f.size() != 5) {
      throw Error(ErrorCode::kMalformedHeader,
                  path.string() + ":" + std::to_string(line_no) + ": expected 5 fields");
    }
    if (f[3] != "probe" && f[3] != "gallery") {
      throw Error(ErrorCode::kMalformedHeader,
                  path.string() + ":" + std::to_string(line_no) + ": role must be probe or gallery");
    }
    if (f[0].empty() || f[1].empty()) {
      throw Error(ErrorCode::kMalformedHeader,
                  path.string() + ":" + std::to_string(line_no) + ": empty item_id or person_id");
    }
    rows.push_back({f[0], f[1], f[2], f[3], f[4]});
  }
  return rows;
}

void write_metadata(const fs::path& path, const std::vector<MetadataRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << kMetadataHeader << '\n';
  for (const auto& r : rows) {
    out << r.item_id << ',' << r.person_id << ',' << r.camera_id << ',' << r.role << ',' << r.image_ref
        << '\n';
  }
}

std::map<PersonId, Vector> read_ground_truth(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot open ground truth " + path.string());
  std::map<PersonId, Vector> truth;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim_cr(line);
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (line_no == 1) {
      if (f.front() != "person_id") {
        throw Error(ErrorCode::kMalformedHeader, path.string() + ": expected header starting 'person_id'");
      }
      continue;
    }
    Vector v(static_cast<Eigen::Index>(f.size() - 1));
    for (std::size_t j = 1; j < f.size(); ++j) v[static_cast<Eigen::Index>(j - 1)] = parse_number(f[j], path, line_no);
    truth.emplace(PersonId{f.front()}, std::move(v));
  }
  return truth;
}

void write_ground_truth(const fs::path& path, const std::map<PersonId, Vector>& truth) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  const auto d = truth.empty() ? 0 : truth.begin()->second.size();
  out << "person_id";
  for (Eigen::Index j = 0; j < d; ++j) out << ",v" << (j + 1);
  out << '\n';
  char buf[32];
  for (const auto& [person, v] : truth) {
    out << person.value;
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v[j]);
      out << ',' << std::string_view(buf, static_cast<std::size_t>(end - buf));
    }
    out << '\n';
  }
}

Dataset load_dataset(const fs::path& features_path, const fs::path& metadata_path, bool normalize) {
  return assemble_dataset(read_features(features_path), read_metadata(metadata_path), normalize);
}

Dataset assemble_dataset(const std::vector<FeatureRecord>& records, const std::vector<MetadataRow>& rows,
                         bool normalize) {
  std::unordered_map<std::string, std::size_t> by_id;
  std::size_t dim = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (i == 0) dim = records[i].values.size();
    if (records[i].values.size() != dim) {
      throw Error(ErrorCode::kDimensionMismatch, "feature '" + records[i].item_id + "' has dimension " +
                                                     std::to_string(records[i].values.size()) +
                                                     ", expected " + std::to_string(dim));
    }
    if (!by_id.emplace(records[i].item_id, i).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate feature item_id '" + records[i].item_id + "'");
    }
  }

  std::vector<Item> probes;
  std::vector<Item> gallery;
  std::set<std::string> seen;
  for (const auto& row : rows) {
    if (!seen.insert(row.item_id).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate metadata item_id '" + row.item_id + "'");
    }
    auto it = by_id.find(row.item_id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::kNotFound, "metadata item '" + row.item_id + "' has no feature vector");
    }
    const auto& values = records[it->second].values;
    Vector feature(static_cast<Eigen::Index>(values.size()));
    for (std::size_t j = 0; j < values.size(); ++j) feature[static_cast<Eigen::Index>(j)] = values[j];
    if (normalize) {
      const double norm = feature.norm();
      if (norm == 0.0) {
        throw Error(ErrorCode::kInvalidArgument, "cannot normalize zero feature '" + row.item_id + "'");
      }
      feature /= norm;
    }
    Item item{row.item_id, PersonId{row.person_id}, row.camera_id, std::move(feature),
              row.image_ref.empty() ? std::nullopt : std::optional<std::string>(row.image_ref)};
    (row.role == "probe" ? probes : gallery).push_back(std::move(item));
  }

  Dataset ds;
  ds.probes = ItemSet(std::move(probes));
  ds.gallery = ItemSet(std::move(gallery));

  std::set<std::string> gallery_cameras;
  for (const auto& g : ds.gallery) gallery_cameras.insert(g.camera);
  for (const auto& p : ds.probes) {
    if (gallery_cameras.size() == 1 && gallery_cameras.count(p.camera)) {
      std::clog << "warning: probe '" << p.item_id << "' shares camera '" << p.camera
                << "' with the gallery\n";
      break;
    }
  }
  return ds;
}

Dataset load_dataset_dir(const fs::path& dir, bool normalize) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kNotFound, "dataset directory " + dir.string() + " not found");
  fs::path features = dir / "features.rfv";
  if (!fs::exists(features)) features = dir / "features.csv";
  Dataset ds = load_dataset(features, dir / "metadata.csv", normalize);
  if (fs::exists(dir / "ground_truth.csv")) ds.ground_truth = read_ground_truth(dir / "ground_truth.csv");
  return ds;
}

}  // namespace hvil
