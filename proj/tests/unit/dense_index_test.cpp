#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "oracles.hpp"
#include "slotfill/dense_index.hpp"
#include "slotfill/error.hpp"
#include "slotfill/random.hpp"
#include "temp_dir.hpp"

namespace slotfill {
namespace {

VectorIndex three_rows() {
  VectorIndex index(2);
  const std::vector<std::string> ids = {"a", "b", "c"};
  const std::vector<DenseVector> rows = {{0, 1}, {2, 0}, {1, 1}};
  index.add(ids, rows);
  return index;
}

std::vector<std::string> ids_of(const ResultList& results) {
  std::vector<std::string> out;
  for (const auto& r : results) out.push_back(r.passage_id);
  return out;
}

TEST(Sim, HandValues) {
  const std::vector<float> x = {1, 0}, y = {0, 1}, a = {1, 2}, b = {3, 4}, v = {3, 4};
  EXPECT_EQ(sim(x, y), 0.0f);
  EXPECT_EQ(sim(a, b), 11.0f);
  EXPECT_EQ(sim(v, v), 25.0f);
  const std::vector<float> three = {1, 2, 3};
  EXPECT_THROW(sim(a, three), DimensionError);
}

TEST(VectorIndex, AddRows) {
  EXPECT_EQ(three_rows().size(), 3u);
  auto index = three_rows();
  const std::vector<std::string> none;
  const std::vector<DenseVector> no_rows;
  index.add(none, no_rows);
  EXPECT_EQ(index.size(), 3u);
}

TEST(VectorIndex, AddErrorsLeaveIndexUnchanged) {
  auto index = three_rows();
  const std::vector<std::string> dup = {"d", "a"};
  const std::vector<DenseVector> rows = {{1, 1}, {1, 1}};
  EXPECT_THROW(index.add(dup, rows), DuplicateIdError);
  const std::vector<std::string> one = {"e"};
  const std::vector<DenseVector> wide = {{1, 2, 3}};
  EXPECT_THROW(index.add(one, wide), DimensionError);
  EXPECT_EQ(index.size(), 3u);
  EXPECT_EQ(index.ids(), (std::vector<std::string>{"a", "b", "c"}));
}

TEST(SearchDense, Argmax) {
  const std::vector<float> q = {1, 0};
  const auto r = three_rows().search(q, 1);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].passage_id, "b");
  EXPECT_EQ(r[0].score, 2.0);
}

TEST(SearchDense, FullOrderAndSaturation) {
  const std::vector<float> q = {1, 0};
  const auto index = three_rows();
  EXPECT_EQ(ids_of(index.search(q, 3)), (std::vector<std::string>{"b", "c", "a"}));
  EXPECT_EQ(index.search(q, 50).size(), 3u);
  const std::vector<std::string> ids = {"a", "b", "c"};
  const std::vector<DenseVector> rows = {{0, 1}, {2, 0}, {1, 1}};
  EXPECT_EQ(index.search(q, 3), oracle::brute_force_dense(ids, rows, {1, 0}, 3));
}

TEST(SearchDense, NegativeScoresAndTies) {
  VectorIndex index(1);
  const std::vector<std::string> ids = {"z", "m", "a"};
  const std::vector<DenseVector> rows = {{-1}, {-1}, {-3}};
  index.add(ids, rows);
  const std::vector<float> q = {1};
  EXPECT_EQ(ids_of(index.search(q, 3)), (std::vector<std::string>{"m", "z", "a"}));
  EXPECT_EQ(index.search(q, 3)[2].score, -3.0);
}

TEST(SearchDense, Errors) {
  const std::vector<float> wide = {1, 0, 0};
  const std::vector<float> ok = {1, 0};
  EXPECT_THROW(three_rows().search(wide, 1), DimensionError);
  EXPECT_THROW(three_rows().search(ok, 0), std::invalid_argument);
}

TEST(SearchDense, BatchMatchesSingle) {
  Rng rng(9);
  VectorIndex index(8);
  std::vector<std::string> ids;
  std::vector<DenseVector> rows;
  for (int i = 0; i < 60; ++i) {
    ids.push_back("p" + std::to_string(i));
    DenseVector v(8);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
    rows.push_back(v);
  }
  index.add(ids, rows);
  std::vector<DenseVector> queries(7, DenseVector(8));
  for (auto& q : queries) {
    for (auto& x : q) x = static_cast<float>(rng.uniform(-1, 1));
  }
  const auto batch = index.search_batch(queries, 5, 3);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    EXPECT_EQ(batch[i], index.search(queries[i], 5));
    EXPECT_EQ(batch[i], oracle::brute_force_dense(ids, rows, queries[i], 5));
  }
}

TEST(VectorIndexFile, RoundtripHundredVectors) {
  Rng rng(21);
  VectorIndex index(16);
  std::vector<std::string> ids;
  std::vector<DenseVector> rows;
  for (int i = 0; i < 100; ++i) {
    ids.push_back("p" + std::to_string(i));
    DenseVector v(16);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
    rows.push_back(v);
  }
  index.add(ids, rows);
  testing::TempDir dir;
  index.save(dir / "v.dvec");
  const auto back = VectorIndex::load(dir / "v.dvec");
  for (int i = 0; i < 20; ++i) {
    DenseVector q(16);
    for (auto& x : q) x = static_cast<float>(rng.uniform(-1, 1));
    EXPECT_EQ(back.search(q, 10), index.search(q, 10));
  }
}

TEST(VectorIndexFile, EmptyRoundtrip) {
  testing::TempDir dir;
  VectorIndex(4).save(dir / "e.dvec");
  const auto back = VectorIndex::load(dir / "e.dvec");
  EXPECT_TRUE(back.empty());
  EXPECT_EQ(back.dimension(), 4u);
}

TEST(VectorIndexFile, DistinctErrors) {
  testing::TempDir dir;
  const auto path = dir / "v.dvec";
  three_rows().save(path);
  for (const char* name : {"t.dvec", "m.dvec", "x.dvec"}) {
    std::filesystem::copy_file(path, dir / name);
    std::filesystem::copy_file(VectorIndex::ids_path_for(path), VectorIndex::ids_path_for(dir / name));
  }
  testing::truncate_to_half(dir / "t.dvec");
  EXPECT_THROW(VectorIndex::load(dir / "t.dvec"), TruncatedFileError);
  testing::overwrite_bytes(dir / "m.dvec", 0, "NOPE");
  EXPECT_THROW(VectorIndex::load(dir / "m.dvec"), BadMagicError);
  testing::set_format_version(dir / "x.dvec", 7);
  EXPECT_THROW(VectorIndex::load(dir / "x.dvec"), VersionMismatchError);
}

}  // namespace
}  // namespace slotfill
