#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <numeric>

#include "hvil/binary_io.hpp"
#include "hvil/dataset_io.hpp"
#include "hvil/error.hpp"
#include "test_util.hpp"

using namespace hvil;
using namespace hvil::testing;

namespace {

Gallery line_gallery() {
  std::vector<Item> items;
  for (int i = 1; i <= 3; ++i) {
    Vector v(2);
    v << i, 0;
    items.push_back({item_name("g", i), PersonId{"x"}, "B", v, {}});
  }
  return Gallery(items);
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an hvil::Error";
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST(RankGallery, IdentityMetricGivesNegativeSquaredDistances) {
  const Gallery g = line_gallery();
  const auto list = rank_gallery(Vector::Zero(2), g, MetricModel::identity(2));
  ASSERT_EQ(list.size(), 3u);
  EXPECT_EQ(list[0].item_id, "g0001");
  EXPECT_EQ(list[1].item_id, "g0002");
  EXPECT_EQ(list[2].item_id, "g0003");
  EXPECT_DOUBLE_EQ(list[0].score, -1.0);
  EXPECT_DOUBLE_EQ(list[1].score, -4.0);
  EXPECT_DOUBLE_EQ(list[2].score, -9.0);
}

TEST(RankGallery, LossRankOfMiddleItemIsOne) {
  const Gallery g = line_gallery();
  const Vector s = gallery_scores(Vector::Zero(2), g, Matrix::Identity(2, 2));
  EXPECT_EQ(loss_rank(s, 1), 1u);
}

TEST(RankGallery, TiesShareRankAndDisplayByItemId) {
  std::vector<Item> items;
  Vector a(2), b(2), c(2);
  a << 1, 0;
  b << 0, 1;  // same distance as a
  c << 0, 3;
  items.push_back({"zeta", PersonId{"x"}, "B", a, {}});
  items.push_back({"alpha", PersonId{"y"}, "B", b, {}});
  items.push_back({"mid", PersonId{"z"}, "B", c, {}});
  const Gallery g(items);
  const Vector s = gallery_scores(Vector::Zero(2), g, Matrix::Identity(2, 2));
  EXPECT_EQ(loss_rank(s, 0), 1u);
  EXPECT_EQ(loss_rank(s, 1), 1u);
  const auto list = rank_by_scores(g, s);
  EXPECT_EQ(list[0].item_id, "alpha");
  EXPECT_EQ(list[1].item_id, "zeta");
  EXPECT_EQ(list[2].item_id, "mid");
}

TEST(RankGallery, DimensionMismatchThrows) {
  EXPECT_EQ(code_of([] { rank_gallery(Vector::Zero(3), line_gallery(), MetricModel::identity(2)); }),
            ErrorCode::kDimensionMismatch);
}

TEST(RankGalleryProperty, LossRankMatchesBruteForceCount) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 49);
    const int d = 2 + static_cast<int>(rng() % 5);
    Gallery g = random_gallery(rng, n, d);
    // Duplicate a feature now and then so ties occur.
    if (trial % 3 == 0) {
      std::vector<Item> items = g.items();
      items[1].feature = items[0].feature;
      g = Gallery(items);
    }
    const Vector p = random_vector(rng, d);
    const MetricModel m(random_spd(rng, d));
    const Vector s = gallery_scores(p, g, m.matrix());
    const auto list = rank_by_scores(g, s);
    for (int i = 0; i < n; ++i) {
      const double fi = m.score(p, g[i].feature);
      std::size_t brute = 0;
      for (int j = 0; j < n; ++j) brute += (j != i && m.score(p, g[j].feature) >= fi) ? 1 : 0;
      EXPECT_EQ(loss_rank(s, i), brute);
      // Display position never exceeds the loss rank; ties only push it up.
      const std::size_t pos = list.position_of(static_cast<std::size_t>(i));
      EXPECT_LE(pos, brute);
    }
    for (std::size_t k = 1; k < list.size(); ++k) {
      EXPECT_GE(list[k - 1].score, list[k].score);
      if (list[k - 1].score == list[k].score) EXPECT_LT(list[k - 1].item_id, list[k].item_id);
    }
  }
}

TEST(RankGalleryProperty, IdentityOrderEqualsEuclidean) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const Gallery g = random_gallery(rng, 40, 6, false);
    const Vector p = random_vector(rng, 6);
    const auto list = rank_gallery(p, g, MetricModel::identity(6));
    std::vector<std::size_t> idx(g.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) {
      return (p - g[a].feature).squaredNorm() < (p - g[b].feature).squaredNorm();
    });
    for (std::size_t k = 0; k < idx.size(); ++k) EXPECT_EQ(list[k].index, idx[k]);
  }
}

TEST(RankGalleryProperty, PermutationInvariant) {
  std::mt19937_64 rng(13);
  const Gallery g = random_gallery(rng, 30, 5);
  std::vector<Item> shuffled = g.items();
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const Gallery h(shuffled);
  const Vector p = random_vector(rng, 5);
  const MetricModel m(random_spd(rng, 5));
  const auto a = rank_gallery(p, g, m);
  const auto b = rank_gallery(p, h, m);
  const Vector sa = gallery_scores(p, g, m.matrix());
  const Vector sb = gallery_scores(p, h, m.matrix());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].item_id, b[k].item_id);
    EXPECT_EQ(a[k].score, b[k].score);
    EXPECT_EQ(loss_rank(sa, a[k].index), loss_rank(sb, b[k].index));
  }
}

TEST(ItemSet, RejectsDuplicatesAndMixedDimensions) {
  Item a{"a", PersonId{"x"}, "B", Vector::Zero(2), {}};
  Item b{"a", PersonId{"y"}, "B", Vector::Zero(2), {}};
  EXPECT_EQ(code_of([&] { ItemSet({a, b}); }), ErrorCode::kDuplicateId);
  b.item_id = "b";
  b.feature = Vector::Zero(3);
  EXPECT_EQ(code_of([&] { ItemSet({a, b}); }), ErrorCode::kDimensionMismatch);
}

TEST(FeedbackLabel, RoundTrip) {
  EXPECT_EQ(parse_feedback_label(to_string(FeedbackLabel::kTrueMatch)), FeedbackLabel::kTrueMatch);
  EXPECT_EQ(parse_feedback_label("strong_negative"), FeedbackLabel::kStrongNegative);
  EXPECT_THROW(parse_feedback_label("weak_negative"), Error);
}

class DatasetIo : public ::testing::Test {
 protected:
  TempDir dir;
  void write_meta(const std::string& rows) {
    write_file(dir.path() / "metadata.csv", "item_id,person_id,camera_id,role,image_ref\n" + rows);
  }
};

TEST_F(DatasetIo, LoadsThreeCsvRowsWithoutNormalization) {
  write_file(dir.path() / "f.csv", "a,1,2\nb,3,4\nc,-1,0.5\n");
  write_meta("a,x,A,probe,\nb,x,B,gallery,img/b.png\nc,y,B,gallery,\n");
  const auto ds = load_dataset(dir.path() / "f.csv", dir.path() / "metadata.csv", false);
  ASSERT_EQ(ds.probes.size(), 1u);
  ASSERT_EQ(ds.gallery.size(), 2u);
  EXPECT_DOUBLE_EQ(ds.probes[0].feature[0], 1.0);
  EXPECT_DOUBLE_EQ(ds.probes[0].feature[1], 2.0);
  EXPECT_DOUBLE_EQ(ds.gallery.at("c").feature[0], -1.0);
  EXPECT_EQ(*ds.gallery.at("b").image_ref, "img/b.png");
  EXPECT_FALSE(ds.gallery.at("c").image_ref.has_value());
  EXPECT_EQ(ds.true_matches(ds.probes[0]), std::vector<std::size_t>{0});
}

TEST_F(DatasetIo, NormalizeGivesUnitNorm) {
  write_file(dir.path() / "f.csv", "item_id,v1,v2\na,3,4\nb,1,1\n");
  write_meta("a,x,A,probe,\nb,x,B,gallery,\n");
  const auto ds = load_dataset(dir.path() / "f.csv", dir.path() / "metadata.csv", true);
  EXPECT_NEAR(ds.probes[0].feature[0], 0.6, 1e-12);
  EXPECT_NEAR(ds.probes[0].feature[1], 0.8, 1e-12);
  for (const auto& g : ds.gallery) EXPECT_NEAR(g.feature.norm(), 1.0, 1e-9);
}

TEST_F(DatasetIo, MixedDimensionsRejected) {
  write_file(dir.path() / "f.csv", "a,1,2,3,4\nb,1,2,3,4,5\n");
  EXPECT_EQ(code_of([&] { read_features(dir.path() / "f.csv"); }), ErrorCode::kDimensionMismatch);
}

TEST_F(DatasetIo, NonFiniteRejected) {
  write_file(dir.path() / "f.csv", "a,1,nan\n");
  EXPECT_EQ(code_of([&] { read_features(dir.path() / "f.csv"); }), ErrorCode::kNonFinite);
}

TEST_F(DatasetIo, MalformedMetadataHeaderRejected) {
  write_file(dir.path() / "metadata.csv", "id,person,camera,role\n");
  EXPECT_EQ(code_of([&] { read_metadata(dir.path() / "metadata.csv"); }), ErrorCode::kMalformedHeader);
}

TEST_F(DatasetIo, DuplicateItemIdRejected) {
  write_file(dir.path() / "f.csv", "a,1,2\na,3,4\n");
  write_meta("a,x,A,probe,\n");
  EXPECT_EQ(code_of([&] { load_dataset(dir.path() / "f.csv", dir.path() / "metadata.csv", false); }),
            ErrorCode::kDuplicateId);
}

TEST_F(DatasetIo, Rfv1RoundTripAndBadMagic) {
  std::vector<FeatureRecord> recs{{"a", {1.5f, -2.0f}}, {"bé", {0.25f, 8.0f}}};
  write_features_rfv1(dir.path() / "f.rfv", recs);
  const auto back = read_features(dir.path() / "f.rfv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].item_id, "bé");
  EXPECT_EQ(back[1].values, recs[1].values);

  // Header layout: magic, u32 d, u64 n.
  std::ifstream in(dir.path() / "f.rfv", std::ios::binary);
  binary::expect_magic(in, "RFV1");
  EXPECT_EQ(binary::read_le<std::uint32_t>(in), 2u);
  EXPECT_EQ(binary::read_le<std::uint64_t>(in), 2u);

  write_file(dir.path() / "bad.rfv", std::string("RFV2\x02\x00\x00\x00", 8));
  EXPECT_THROW(read_features(dir.path() / "bad.rfv"), Error);
}

TEST_F(DatasetIo, GroundTruthRoundTripIsExact) {
  std::map<PersonId, Vector> truth;
  Vector v(3);
  v << 0.1, -1.0 / 3.0, 1e-300;
  truth[PersonId{"id1"}] = v;
  write_ground_truth(dir.path() / "gt.csv", truth);
  const auto back = read_ground_truth(dir.path() / "gt.csv");
  EXPECT_EQ(back.at(PersonId{"id1"}), v);
}

TEST(MetricModel, ValidatesAndRoundTrips) {
  Matrix asym(2, 2);
  asym << 1, 0.5, 0.4, 1;
  EXPECT_THROW(MetricModel{asym}, Error);
  Matrix indefinite(2, 2);
  indefinite << 1, 2, 2, 1;
  EXPECT_EQ(code_of([&] { MetricModel{indefinite}; }), ErrorCode::kNotPositiveDefinite);

  std::mt19937_64 rng(3);
  const MetricModel m(random_spd(rng, 5), 42);
  TempDir dir;
  m.save(dir.path() / "m.hvm");
  const auto back = MetricModel::load(dir.path() / "m.hvm");
  EXPECT_TRUE(back == m);
  EXPECT_EQ(back.update_count(), 42u);
  EXPECT_EQ(std::filesystem::file_size(dir.path() / "m.hvm"), 4u + 4u + 25u * 8u + 8u);
}
