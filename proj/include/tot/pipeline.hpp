#pragma once

#include <functional>
#include <vector>

#include "tot/dataio.hpp"
#include "tot/decode.hpp"
#include "tot/encoder.hpp"
#include "tot/eval.hpp"
#include "tot/checkpoint.hpp"

namespace tot {

// Frame probabilities -> fixed-order Viterbi, one video at a time.
void for_each_segmentation(
    const EncoderParams& params, const DatasetCatalog& catalog, const InferenceSettings& settings,
    const std::function<void(std::size_t video, const SegmentationResult& result)>& visit);

// Decoded cluster ids paired with ground truth, for videos that carry labels.
std::vector<VideoPrediction> segment_catalog(const EncoderParams& params, const DatasetCatalog& catalog,
                                             const InferenceSettings& settings);

EvalReport evaluate_catalog(const EncoderParams& params, const DatasetCatalog& catalog,
                            const InferenceSettings& settings, OverlapRule overlap = OverlapRule::ground_truth_fraction);

}  // namespace tot
