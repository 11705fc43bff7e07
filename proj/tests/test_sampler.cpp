#include <doctest.h>

#include <cmath>
#include <numeric>

#include "tot/dataio.hpp"
#include "tot/errors.hpp"
#include "tot/sampler.hpp"

using namespace tot;

namespace {

double chi_square(const std::vector<std::size_t>& counts) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  const double expected = total / static_cast<double>(counts.size());
  double stat = 0.0;
  for (std::size_t c : counts) stat += std::pow(static_cast<double>(c) - expected, 2) / expected;
  return stat;
}

// Mean + 3 standard deviations of a chi-square with `dof` degrees of freedom.
double chi_square_bound(std::size_t dof) {
  return static_cast<double>(dof) + 3.0 * std::sqrt(2.0 * static_cast<double>(dof));
}

DatasetCatalog catalog_with_lengths(std::initializer_list<std::size_t> lengths) {
  DatasetCatalog cat("act", 3);
  std::size_t v = 0;
  for (std::size_t len : lengths) {
    Matrix f(len, 2);
    for (std::size_t t = 0; t < len; ++t) {
      f(t, 0) = static_cast<double>(t);
      f(t, 1) = static_cast<double>(v);
    }
    cat.add_video({"v" + std::to_string(v++), f, std::nullopt, std::nullopt});
  }
  return cat;
}

}  // namespace

TEST_CASE("sample_ordered bin structure") {
  Rng rng(1);
  const auto exact = sample_ordered(7, 7, rng);
  CHECK(exact == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6});

  for (int trial = 0; trial < 200; ++trial) {
    const auto idx = sample_ordered(100, 4, rng);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(idx[i] >= 25 * i);
      CHECK(idx[i] <= 25 * i + 24);
    }
  }
  CHECK_THROWS_AS(sample_ordered(3, 4, rng), ContractError);
}

TEST_CASE("sample_ordered is uniform within each bin") {
  Rng rng(2024);
  std::vector<std::vector<std::size_t>> counts(4, std::vector<std::size_t>(25, 0));
  for (int draw = 0; draw < 10000; ++draw) {
    const auto idx = sample_ordered(100, 4, rng);
    for (std::size_t i = 0; i < 4; ++i) ++counts[i][idx[i] - 25 * i];
  }
  for (const auto& bin : counts) CHECK(chi_square(bin) < chi_square_bound(24));
}

TEST_CASE("sample_ordered is strictly increasing for uneven bins") {
  Rng rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(30);
    const std::size_t f = n + rng.uniform_index(100);
    const auto idx = sample_ordered(f, n, rng);
    for (std::size_t i = 1; i < idx.size(); ++i) CHECK(idx[i] > idx[i - 1]);
    CHECK(idx.back() < f);
  }
}

TEST_CASE("sample_positive window and clamping") {
  Rng rng(9);
  for (int i = 0; i < 500; ++i) {
    CHECK(sample_positive(0, 30, 10, rng) <= 9);
    const auto p = sample_positive(50, 30, 1000, rng);
    CHECK(p >= 20);
    CHECK(p <= 80);
  }
  std::vector<std::size_t> counts(61, 0);
  for (int i = 0; i < 61000; ++i) ++counts[sample_positive(50, 30, 1000, rng) - 20];
  CHECK(chi_square(counts) < chi_square_bound(60));
  CHECK_THROWS_AS(sample_positive(5, 0, 10, rng), ContractError);
}

TEST_CASE("build_batch block layout") {
  const DatasetCatalog cat = catalog_with_lengths({600, 300, 700});
  Rng rng(3);
  const Batch two = build_batch(cat, {512, 2, 30, true}, rng);
  REQUIRE(two.blocks.size() == 2);
  CHECK(two.blocks[0].length == 256);
  CHECK(two.blocks[1].length == 256);
  CHECK(two.blocks[1].start_row == 256);
  CHECK(two.blocks[0].video != two.blocks[1].video);
  CHECK(two.frame_features.rows() == 512);

  const Batch one = build_batch(cat, {64, 1, 30, true}, rng);
  REQUIRE(one.blocks.size() == 1);
  CHECK(one.blocks[0].length == 64);
}

TEST_CASE("build_batch invariants over random batches") {
  const DatasetCatalog cat = catalog_with_lengths({90, 40, 200, 65, 33});
  Rng rng(12);
  const std::size_t window = 5;
  for (int trial = 0; trial < 100; ++trial) {
    const Batch b = build_batch(cat, {64, 2, window, true}, rng);
    std::size_t total = 0;
    for (const auto& block : b.blocks) {
      total += block.length;
      for (std::size_t r = block.start_row; r < block.start_row + block.length; ++r) {
        if (r > block.start_row) CHECK(b.frame_positions[r] > b.frame_positions[r - 1]);
        const auto anchor = b.frame_positions[r];
        const auto pos = b.positive_positions[r];
        CHECK((pos + window >= anchor && pos <= anchor + window));
        // Features carry (frame index, video index): rows come from the block's video.
        CHECK(b.frame_features(r, 0) == static_cast<double>(anchor));
        CHECK(b.frame_features(r, 1) == static_cast<double>(block.video));
        CHECK(b.positive_features(r, 0) == static_cast<double>(pos));
        CHECK(b.positive_features(r, 1) == static_cast<double>(block.video));
      }
    }
    CHECK(total == 64);
  }
}

TEST_CASE("build_batch skips short videos and errors when too few remain") {
  const DatasetCatalog cat = catalog_with_lengths({100, 10, 12});
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    const Batch b = build_batch(cat, {40, 1, 3, false}, rng);
    CHECK(b.blocks[0].video == 0);
    CHECK(b.positive_positions.empty());
  }
  CHECK_THROWS_WITH_AS(build_batch(cat, {40, 2, 3, true}, rng), doctest::Contains("at least 20 frames"), DataError);
  CHECK_THROWS_AS(build_batch(cat, {41, 2, 3, true}, rng), ContractError);
}

TEST_CASE("build_batch is deterministic given the seed") {
  const DatasetCatalog cat = catalog_with_lengths({90, 40, 200, 65});
  Rng a(77), b(77);
  for (int i = 0; i < 5; ++i) {
    const Batch x = build_batch(cat, {32, 2, 4, true}, a);
    const Batch y = build_batch(cat, {32, 2, 4, true}, b);
    CHECK(x.frame_positions == y.frame_positions);
    CHECK(x.positive_positions == y.positive_positions);
    CHECK(x.frame_features == y.frame_features);
  }
}
