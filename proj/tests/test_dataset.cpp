#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"
#include "upl/dataset.hpp"
#include "upl/errors.hpp"

namespace upl {
namespace {

using testing::TempDir;
using testing::write_file;

TEST(TripletParsing, MapsFieldsDirectly) {
  const RawTriplet t = parse_triplet_line("3\t17\t5", 1);
  EXPECT_EQ(t.user, "3");
  EXPECT_EQ(t.item, "17");
  EXPECT_EQ(t.rating, 5);
}

TEST(TripletParsing, MalformedLineReportsLineNumber) {
  try {
    parse_triplet_line("3\t17", 42);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 42u);
  }
  EXPECT_THROW(parse_triplet_line("a b c", 1), ParseError);
}

TEST(TripletLoading, RemapsIdsAndKeepsMapping) {
  TempDir dir("triplets");
  write_file(dir / "r.txt", "3\t17\t5\n3\t2\t1\n10\t17\t4\n");
  const ExplicitRatings r = load_triplets(dir / "r.txt", RatingFormat::kTriplets);
  ASSERT_EQ(r.num_users, 2u);
  ASSERT_EQ(r.num_items, 2u);
  // numeric ordering: users 3 < 10, items 2 < 17
  EXPECT_EQ(r.user_ids.index("3"), 0u);
  EXPECT_EQ(r.user_ids.index("10"), 1u);
  EXPECT_EQ(r.item_ids.index("17"), 1u);
  const Rating expected{0, 1, 5};
  EXPECT_NE(std::find(r.entries.begin(), r.entries.end(), expected), r.entries.end());
  EXPECT_THROW(r.user_ids.index("99"), DomainError);
}

TEST(TripletLoading, RatingAboveMaxIsDomainErrorAtLine) {
  TempDir dir("triplets_bad");
  write_file(dir / "r.txt", "0\t0\t3\n1\t2\t7\n");
  try {
    load_triplets(dir / "r.txt", RatingFormat::kTriplets);
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(TripletLoading, DuplicatePairIsIntegrityError) {
  TempDir dir("triplets_dup");
  write_file(dir / "r.txt", "0\t0\t3\n0\t0\t4\n");
  EXPECT_THROW(load_triplets(dir / "r.txt", RatingFormat::kTriplets), IntegrityError);
}

TEST(DenseLoading, ZeroMeansUnrated) {
  TempDir dir("dense");
  write_file(dir / "r.ascii", "0 4 0\n");
  const ExplicitRatings r = load_triplets(dir / "r.ascii", RatingFormat::kDense);
  ASSERT_EQ(r.entries.size(), 1u);
  EXPECT_EQ(r.entries[0], (Rating{0, 1, 4}));
  EXPECT_EQ(r.num_items, 3u);
}

TEST(DenseLoading, RaggedRowsAreParseErrors) {
  TempDir dir("dense_ragged");
  write_file(dir / "r.ascii", "0 4 0\n1 2\n");
  EXPECT_THROW(load_triplets(dir / "r.ascii", RatingFormat::kDense), ParseError);
}

TEST(SplitPair, TripletSplitsShareOneIndexSpace) {
  TempDir dir("pair");
  write_file(dir / "train.txt", "1\t1\t5\n2\t3\t2\n");
  write_file(dir / "test.txt", "5\t1\t4\n");
  const auto pair = load_split_pair(dir / "train.txt", dir / "test.txt", RatingFormat::kTriplets);
  EXPECT_EQ(pair.train.num_users, 3u);
  EXPECT_EQ(pair.test.num_users, 3u);
  EXPECT_EQ(pair.train.user_ids, pair.test.user_ids);
  EXPECT_EQ(pair.test.entries[0].user, 2u);
}

TEST(Relevance, PinnedValues) {
  EXPECT_DOUBLE_EQ(rating_to_relevance(5, 0.0, 5), 1.0);
  EXPECT_DOUBLE_EQ(rating_to_relevance(5, 0.1, 5), 1.0);
  // 0.1 + 0.9 / 31
  EXPECT_NEAR(rating_to_relevance(1, 0.1, 5), 0.129032258, 1e-9);
  EXPECT_THROW(rating_to_relevance(6, 0.1, 5), DomainError);
  EXPECT_THROW(rating_to_relevance(0, 0.1, 5), DomainError);
}

TEST(Relevance, MatchesIndependentFormulaEverywhere) {
  for (int r = 1; r <= 5; ++r) {
    for (double eps : {0.0, 0.05, 0.1, 0.3, 0.9}) {
      const double expected = eps + (1.0 - eps) * (std::pow(2.0, r) - 1.0) / 31.0;
      EXPECT_NEAR(rating_to_relevance(r, eps, 5), expected, 1e-15);
    }
  }
}

TEST(Relevance, MonotoneInRating) {
  for (double eps : {0.0, 0.1, 0.5}) {
    for (int r = 1; r < 5; ++r) {
      EXPECT_LT(rating_to_relevance(r, eps, 5), rating_to_relevance(r + 1, eps, 5));
    }
  }
}

ExplicitRatings ratings_of(std::size_t users, std::size_t items, int value) {
  ExplicitRatings r;
  r.num_users = users;
  r.num_items = items;
  r.user_ids = IdMap::identity(users);
  r.item_ids = IdMap::identity(items);
  for (UserIndex u = 0; u < users; ++u) {
    for (ItemIndex i = 0; i < items; ++i) r.entries.push_back({u, i, value});
  }
  return r;
}

TEST(SemiSynthetic, TopRatingWithoutNoiseAlwaysClicks) {
  const auto d = generate_semi_synthetic(ratings_of(3, 4, 5), 0.0, 99);
  for (const auto& x : d.exposed) {
    EXPECT_DOUBLE_EQ(x.relevance_prob, 1.0);
    EXPECT_TRUE(x.clicked());
  }
}

TEST(SemiSynthetic, UnratedCellsAreNeverExposed) {
  ExplicitRatings r = ratings_of(2, 3, 4);
  r.entries.erase(r.entries.begin() + 1);  // (0, 1) unrated
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto d = generate_semi_synthetic(r, 0.1, seed);
    for (const auto& x : d.exposed) EXPECT_FALSE(x.user == 0 && x.item == 1);
    const auto clicks = d.clicks_by_user();
    EXPECT_EQ(std::count(clicks[0].begin(), clicks[0].end(), 1u), 0);
  }
}

TEST(SemiSynthetic, ClickCountConcentratesAroundHalf) {
  ExplicitRatings r2 = ratings_of(100, 100, 1);
  r2.r_max = 2;
  // eps + (1 - eps) / 3 = 0.5 at eps = 0.25
  const auto d2 = generate_semi_synthetic(r2, 0.25, 2024);
  ASSERT_NEAR(d2.exposed[0].relevance_prob, 0.5, 1e-15);
  const double n = 10000.0;
  const double sd = std::sqrt(n * 0.25);
  EXPECT_NEAR(static_cast<double>(d2.num_clicks()), 5000.0, 3.0 * sd);
}

TEST(SemiSynthetic, ClicksImplyRelevanceAndExposure) {
  ExplicitRatings r = ratings_of(20, 30, 3);
  const auto d = generate_semi_synthetic(r, 0.1, 5);
  d.validate();
  for (const auto& x : d.exposed) {
    if (x.clicked()) EXPECT_TRUE(x.relevant);
  }
  EXPECT_EQ(d.exposed.size(), 600u);
}

TEST(SemiSynthetic, SameSeedSameDraws) {
  ExplicitRatings r = ratings_of(10, 10, 3);
  EXPECT_EQ(generate_semi_synthetic(r, 0.1, 7).exposed, generate_semi_synthetic(r, 0.1, 7).exposed);
  EXPECT_NE(generate_semi_synthetic(r, 0.1, 7).exposed, generate_semi_synthetic(r, 0.1, 8).exposed);
}

TEST(ValidationSplit, FloorSizedPartition) {
  const auto d = generate_semi_synthetic(ratings_of(10, 10, 3), 0.1, 1);
  const auto s = split_validation(d, 0.1, 3);
  EXPECT_EQ(s.validation.exposed.size(), 10u);
  EXPECT_EQ(s.train.exposed.size(), 90u);
  const auto s2 = split_validation(d, 0.15, 3);
  EXPECT_EQ(s2.validation.exposed.size(), 15u);
}

TEST(ValidationSplit, DeterministicAndDisjoint) {
  const auto d = generate_semi_synthetic(ratings_of(10, 10, 3), 0.1, 1);
  const auto a = split_validation(d, 0.1, 3);
  const auto b = split_validation(d, 0.1, 3);
  EXPECT_EQ(a.validation.exposed, b.validation.exposed);
  for (const auto& v : a.validation.exposed) {
    EXPECT_EQ(std::find(a.train.exposed.begin(), a.train.exposed.end(), v), a.train.exposed.end());
  }
}

TEST(ValidationSplit, FractionBounds) {
  const auto d = generate_semi_synthetic(ratings_of(2, 2, 3), 0.1, 1);
  EXPECT_THROW(split_validation(d, 0.0, 1), DomainError);
  EXPECT_THROW(split_validation(d, 1.0, 1), DomainError);
}

TEST(DatasetIo, RoundTrips) {
  TempDir dir("dataset_io");
  const auto d = generate_semi_synthetic(ratings_of(4, 5, 2), 0.1, 11);
  save_dataset(d, dir / "split");
  const auto back = load_dataset(dir / "split");
  EXPECT_EQ(back.exposed, d.exposed);
  EXPECT_EQ(back.num_users, d.num_users);
  EXPECT_EQ(back.epsilon, d.epsilon);

  const IdMap ids = IdMap::from_raw({"b", "a", "c"});
  save_id_map(ids, dir / "ids.tsv");
  EXPECT_EQ(load_id_map(dir / "ids.tsv"), ids);
  EXPECT_EQ(ids.raw(0), "a");
}

}  // namespace
}  // namespace upl
