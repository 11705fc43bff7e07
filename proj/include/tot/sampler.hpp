#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tot/dataio.hpp"
#include "tot/matrix.hpp"
#include "tot/rng.hpp"

namespace tot {

struct VideoBlock {
  std::size_t video = 0;  // index into the catalog
  std::string video_id;
  std::size_t start_row = 0;
  std::size_t length = 0;
};

// B ordered frames drawn from a few videos, plus one temporal positive per frame.
struct Batch {
  Matrix frame_features;     // B x D_in
  Matrix positive_features;  // B x D_in
  std::vector<VideoBlock> blocks;
  std::vector<std::size_t> frame_positions;
  std::vector<std::size_t> positive_positions;

  std::size_t size() const { return frame_positions.size(); }
};

// One index drawn uniformly from each of `count` equal-length bins of
// [0, video_len). Bin i spans [floor(i*F/N), floor((i+1)*F/N) - 1].
std::vector<std::size_t> sample_ordered(std::size_t video_len, std::size_t count, Rng& rng);

// Uniform over [max(0, anchor - window), min(F - 1, anchor + window)].
std::size_t sample_positive(std::size_t anchor, std::size_t window, std::size_t video_len, Rng& rng);

struct BatchSpec {
  std::size_t batch_size = 512;
  std::size_t videos_per_batch = 2;
  std::size_t positive_window = 30;
  bool with_positives = true;
};

// Picks videos_per_batch distinct videos among those with at least
// batch_size / videos_per_batch frames and samples an ordered block from each.
Batch build_batch(const DatasetCatalog& catalog, const BatchSpec& spec, Rng& rng);

// Catalog indices of videos long enough to contribute a block.
std::vector<std::size_t> eligible_videos(const DatasetCatalog& catalog, std::size_t frames_per_video);

}  // namespace tot
