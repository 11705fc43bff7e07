#include "tot/sampler.hpp"

#include <algorithm>

#include "tot/errors.hpp"

namespace tot {

std::vector<std::size_t> sample_ordered(std::size_t video_len, std::size_t count, Rng& rng) {
  if (count == 0) throw ContractError("sample_ordered: count must be at least 1");
  if (video_len < count) {
    throw ContractError("sample_ordered: video has " + std::to_string(video_len) +
                        " frames, fewer than the " + std::to_string(count) + " bins requested");
  }
  std::vector<std::size_t> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t lo = i * video_len / count;
    const std::size_t hi = (i + 1) * video_len / count - 1;
    out[i] = rng.uniform_between(lo, hi);
  }
  return out;
}

std::size_t sample_positive(std::size_t anchor, std::size_t window, std::size_t video_len, Rng& rng) {
  if (window < 1) throw ContractError("sample_positive: window must be at least 1");
  if (anchor >= video_len) throw ContractError("sample_positive: anchor outside the video");
  const std::size_t lo = anchor > window ? anchor - window : 0;
  const std::size_t hi = std::min(video_len - 1, anchor + window);
  return rng.uniform_between(lo, hi);
}

std::vector<std::size_t> eligible_videos(const DatasetCatalog& catalog, std::size_t frames_per_video) {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < catalog.size(); ++v) {
    if (catalog.videos()[v].num_frames >= frames_per_video) out.push_back(v);
  }
  return out;
}

Batch build_batch(const DatasetCatalog& catalog, const BatchSpec& spec, Rng& rng) {
  if (spec.videos_per_batch == 0 || spec.batch_size % spec.videos_per_batch != 0) {
    throw ContractError("build_batch: batch size " + std::to_string(spec.batch_size) +
                        " is not divisible by videos per batch " +
                        std::to_string(spec.videos_per_batch));
  }
  const std::size_t per_video = spec.batch_size / spec.videos_per_batch;
  std::vector<std::size_t> pool = eligible_videos(catalog, per_video);
  if (pool.size() < spec.videos_per_batch) {
    throw DataError("build_batch: need " + std::to_string(spec.videos_per_batch) +
                    " videos with at least " + std::to_string(per_video) + " frames, found " +
                    std::to_string(pool.size()));
  }

  // Partial Fisher-Yates: uniform choice without replacement.
  for (std::size_t i = 0; i < spec.videos_per_batch; ++i) {
    std::swap(pool[i], pool[i + rng.uniform_index(pool.size() - i)]);
  }

  Batch batch;
  batch.frame_features = Matrix(spec.batch_size, catalog.feature_dim());
  if (spec.with_positives) batch.positive_features = Matrix(spec.batch_size, catalog.feature_dim());
  batch.frame_positions.reserve(spec.batch_size);
  batch.positive_positions.reserve(spec.batch_size);

  for (std::size_t b = 0; b < spec.videos_per_batch; ++b) {
    const std::size_t video = pool[b];
    const VideoEntry& entry = catalog.videos()[video];
    const std::size_t start = b * per_video;
    batch.blocks.push_back({video, entry.video_id, start, per_video});

    const auto anchors = sample_ordered(entry.num_frames, per_video, rng);
    const Matrix anchor_rows = catalog.gather_rows(video, anchors);
    std::copy(anchor_rows.values().begin(), anchor_rows.values().end(),
              batch.frame_features.row(start).begin());
    batch.frame_positions.insert(batch.frame_positions.end(), anchors.begin(), anchors.end());

    if (spec.with_positives) {
      std::vector<std::size_t> positives(per_video);
      for (std::size_t i = 0; i < per_video; ++i) {
        positives[i] = sample_positive(anchors[i], spec.positive_window, entry.num_frames, rng);
      }
      const Matrix positive_rows = catalog.gather_rows(video, positives);
      std::copy(positive_rows.values().begin(), positive_rows.values().end(),
                batch.positive_features.row(start).begin());
      batch.positive_positions.insert(batch.positive_positions.end(), positives.begin(),
                                      positives.end());
    }
  }
  return batch;
}

}  // namespace tot
