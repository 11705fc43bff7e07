#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tot/checkpoint.hpp"
#include "tot/dataio.hpp"
#include "tot/encoder.hpp"
#include "tot/losses.hpp"
#include "tot/matrix.hpp"
#include "tot/sampler.hpp"
#include "tot/transport.hpp"

namespace tot {

// The ablation grid: transport kernel (plain OT or temporal OT) crossed with
// the optional temporal coherence term.
enum class TrainMode { ot, ot_tcl, tot, tot_tcl };

std::string to_string(TrainMode mode);
std::optional<TrainMode> parse_train_mode(const std::string& text);
inline bool uses_temporal_prior(TrainMode m) { return m == TrainMode::tot || m == TrainMode::tot_tcl; }
inline bool uses_coherence(TrainMode m) { return m == TrainMode::ot_tcl || m == TrainMode::tot_tcl; }

struct TrainConfig {
  TrainMode mode = TrainMode::tot;
  std::size_t batch_size = 512;
  std::size_t videos_per_batch = 2;
  // Passes over the video list; ignored when `iterations` is set.
  std::size_t epochs = 30;
  std::size_t iterations = 0;
  std::size_t freeze_iters = 100;
  std::size_t embed_dim = 30;
  std::size_t hidden_dim = 0;      // 0 means 2 * embed_dim
  std::size_t num_prototypes = 0;  // 0 means the catalog's action count
  bool normalize = true;
  bool renormalize_q = false;
  // Solve one transport problem over the whole batch instead of one per video.
  bool single_prior = false;
  std::uint64_t seed = 0;
  LossConfig loss;
  TransportConfig transport;
  AdamConfig adam;

  std::size_t resolved_iterations(std::size_t num_videos) const;
  EncoderShape encoder_shape(std::size_t input_dim, std::size_t catalog_actions) const;
};

// Forward state for one batch: anchors occupy the first `num_anchors` rows
// of the stacked input, positives (if any) the rest.
struct BatchForward {
  EncoderOutput encoded;
  NormalizedRows embeddings;
  NormalizedRows prototypes;
  Matrix scores;  // anchors x K, cosine (or raw) similarities
  std::size_t num_anchors = 0;
};

BatchForward forward_batch(const EncoderParams& params, const Matrix& stacked_input,
                           std::size_t num_anchors, bool normalize);

struct ObjectiveResult {
  double cross_entropy = 0.0;
  double coherence = 0.0;
  double total = 0.0;
  EncoderParams grads;
};

// Loss and exact gradients for fixed pseudo-labels `codes` (anchors x K).
// Coherence is included when the forward pass carries positives and alpha > 0.
ObjectiveResult evaluate_objective(const EncoderParams& params, const BatchForward& fwd,
                                   std::span<const VideoBlock> blocks, const Matrix& codes,
                                   const LossConfig& loss, bool use_coherence);

struct TrainLogEntry {
  std::size_t iteration = 0;
  double cross_entropy = 0.0;
  double coherence = 0.0;
  double total = 0.0;
  double row_error = 0.0;
  double col_error = 0.0;
};

struct MemoryReport {
  std::size_t embedding_bytes = 0;  // anchor embeddings Z, B x D doubles
  std::size_t peak_rows = 0;        // tallest matrix allocated inside the loop
  std::size_t peak_elements = 0;
  std::size_t allocations = 0;
};

struct TrainResult {
  EncoderParams params;
  AdamState adam;
  std::vector<TrainLogEntry> log;
  MemoryReport memory;

  Checkpoint checkpoint(const TrainConfig& config) const;
};

// Online training: each iteration samples a batch, solves pseudo-labels on
// that batch only, and takes one Adam step. `progress` receives warnings.
TrainResult train(const DatasetCatalog& catalog, const TrainConfig& config,
                  std::ostream* progress = nullptr);

void write_train_log(std::ostream& os, std::span<const TrainLogEntry> log);

// Cluster probabilities for every frame of one feature matrix, computed in
// chunks of at most `chunk_rows` frames.
Matrix frame_probabilities(const EncoderParams& params, const Matrix& features,
                           const InferenceSettings& settings, std::size_t chunk_rows = 4096);

// Visits videos one at a time; only one video's features are resident.
void for_each_video_probabilities(
    const EncoderParams& params, const DatasetCatalog& catalog, const InferenceSettings& settings,
    const std::function<void(std::size_t video, const Matrix& probabilities)>& visit,
    std::size_t chunk_rows = 4096);

std::vector<Matrix> embed_dataset(const EncoderParams& params, const DatasetCatalog& catalog,
                                  const InferenceSettings& settings, std::size_t chunk_rows = 4096);

}  // namespace tot
