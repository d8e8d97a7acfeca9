#include "hvil/synthetic.hpp"

#include <cstdio>
#include <random>

#include "hvil/error.hpp"

namespace hvil {

namespace {

Matrix standard_normal(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = normal(rng);
  }
  return m;
}

std::string padded(const char* prefix, int value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%04d", prefix, value);
  return buf;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (n_identities < 2) throw Error(ErrorCode::kInvalidArgument, "n_identities must be >= 2");
  if (dim < 2) throw Error(ErrorCode::kInvalidArgument, "dim must be >= 2");
  if (nuisance_rank < 0 || nuisance_rank > dim) throw Error(ErrorCode::kInvalidArgument, "nuisance_rank must be in [0, dim]");
  if (!(sigma >= 0.0) || !(transform_scale >= 0.0) || !(nuisance_strength >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "sigma, transform_scale and nuisance_strength must be >= 0");
  }
  if (probe_shots < 1 || gallery_shots < 1) throw Error(ErrorCode::kInvalidArgument, "shots must be >= 1");
}

SyntheticData gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const int n = spec.n_identities, d = spec.dim, r = spec.nuisance_rank;

  const Matrix centroids = standard_normal(rng, n, d);
  Matrix basis(d, r);
  if (r > 0) {
    Eigen::HouseholderQR<Matrix> qr(standard_normal(rng, d, r));
    basis = qr.householderQ() * Matrix::Identity(d, r);
  }
  Matrix transforms[2];
  for (auto& t : transforms) {
    t = Matrix::Identity(d, d);
    if (r > 0) t += spec.transform_scale * basis * standard_normal(rng, r, r) * basis.transpose();
  }

  SyntheticData data;
  for (int i = 0; i < n; ++i) data.ground_truth[PersonId{padded("id", i)}] = centroids.row(i).transpose();

  const char* roles[2] = {"probe", "gallery"};
  const char* cameras[2] = {"camA", "camB"};
  const char* prefixes[2] = {"p", "g"};
  const int shots[2] = {spec.probe_shots, spec.gallery_shots};
  for (int view = 0; view < 2; ++view) {
    for (int shot = 0; shot < shots[view]; ++shot) {
      const Matrix clean = centroids * transforms[view].transpose();
      const Matrix noise = spec.sigma * standard_normal(rng, n, d);
      Matrix nuisance = Matrix::Zero(n, d);
      if (r > 0) nuisance = spec.sigma * spec.nuisance_strength * standard_normal(rng, n, r) * basis.transpose();
      const Matrix x = clean + noise + nuisance;
      for (int i = 0; i < n; ++i) {
        FeatureRecord rec;
        rec.item_id = padded(prefixes[view], i) + "_" + std::to_string(shot);
        rec.values.resize(static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j) rec.values[static_cast<std::size_t>(j)] = static_cast<float>(x(i, j));
        data.metadata.push_back({rec.item_id, padded("id", i), cameras[view], roles[view], ""});
        data.features.push_back(std::move(rec));
      }
    }
  }
  return data;
}

Dataset SyntheticData::to_dataset(bool normalize) const {
  Dataset ds = assemble_dataset(features, metadata, normalize);
  ds.ground_truth = ground_truth;
  return ds;
}

void SyntheticData::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  write_features_rfv1(dir / "features.rfv", features);
  write_metadata(dir / "metadata.csv", metadata);
  write_ground_truth(dir / "ground_truth.csv", ground_truth);
}

}  // namespace hvil
