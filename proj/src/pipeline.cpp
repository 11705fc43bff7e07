#include "tot/pipeline.hpp"

#include "tot/errors.hpp"
#include "tot/trainer.hpp"

namespace tot {

void for_each_segmentation(
    const EncoderParams& params, const DatasetCatalog& catalog, const InferenceSettings& settings,
    const std::function<void(std::size_t, const SegmentationResult&)>& visit) {
  for_each_video_probabilities(params, catalog, settings, [&](std::size_t v, const Matrix& p) {
    visit(v, viterbi_fixed_order(log_probabilities(p)));
  });
}

std::vector<VideoPrediction> segment_catalog(const EncoderParams& params, const DatasetCatalog& catalog,
                                             const InferenceSettings& settings) {
  std::vector<VideoPrediction> out;
  for_each_segmentation(params, catalog, settings, [&](std::size_t v, const SegmentationResult& r) {
    const VideoEntry& entry = catalog.videos()[v];
    if (!entry.labels) return;
    out.push_back({entry.video_id, r.labels, *entry.labels});
  });
  return out;
}

EvalReport evaluate_catalog(const EncoderParams& params, const DatasetCatalog& catalog,
                            const InferenceSettings& settings, OverlapRule overlap) {
  const auto predictions = segment_catalog(params, catalog, settings);
  if (predictions.empty()) throw DataError("evaluate: no labelled videos in " + catalog.activity_name());
  EvalOptions opts;
  opts.background = catalog.background_id();
  opts.overlap = overlap;
  return evaluate_activity(catalog.activity_name(), predictions, params.prototypes.rows(), opts);
}

}  // namespace tot
