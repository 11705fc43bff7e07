#include "tot/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "tot/errors.hpp"

namespace tot {

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::ot: return "ot";
    case TrainMode::ot_tcl: return "ot+tcl";
    case TrainMode::tot: return "tot";
    case TrainMode::tot_tcl: return "tot+tcl";
  }
  return "?";
}

std::optional<TrainMode> parse_train_mode(const std::string& text) {
  std::string t;
  for (char c : text) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (t == "ot") return TrainMode::ot;
  if (t == "ot+tcl" || t == "ot_tcl") return TrainMode::ot_tcl;
  if (t == "tot") return TrainMode::tot;
  if (t == "tot+tcl" || t == "tot_tcl") return TrainMode::tot_tcl;
  return std::nullopt;
}

std::size_t TrainConfig::resolved_iterations(std::size_t num_videos) const {
  if (iterations > 0) return iterations;
  const std::size_t per_epoch = (num_videos + videos_per_batch - 1) / std::max<std::size_t>(1, videos_per_batch);
  return std::max<std::size_t>(1, epochs * per_epoch);
}

EncoderShape TrainConfig::encoder_shape(std::size_t input_dim, std::size_t catalog_actions) const {
  if (num_prototypes != 0 && catalog_actions != 0 && num_prototypes != catalog_actions) {
    throw ContractError("train: configured " + std::to_string(num_prototypes) +
                        " prototypes but the catalog has " + std::to_string(catalog_actions) +
                        " actions");
  }
  EncoderShape shape;
  shape.input_dim = input_dim;
  shape.embed_dim = embed_dim;
  shape.hidden_dim = hidden_dim != 0 ? hidden_dim : 2 * embed_dim;
  shape.num_prototypes = num_prototypes != 0 ? num_prototypes : catalog_actions;
  if (shape.num_prototypes == 0) throw ContractError("train: number of prototypes is zero");
  return shape;
}

namespace {

NormalizedRows passthrough(const Matrix& m) {
  return {m, std::vector<double>(m.rows(), 1.0), std::vector<bool>(m.rows(), false)};
}

}  // namespace

BatchForward forward_batch(const EncoderParams& params, const Matrix& stacked_input,
                           std::size_t num_anchors, bool normalize) {
  if (num_anchors == 0 || num_anchors > stacked_input.rows()) {
    throw ContractError("forward_batch: anchor count out of range");
  }
  BatchForward fwd;
  fwd.num_anchors = num_anchors;
  fwd.encoded = forward(params, stacked_input);
  fwd.embeddings = normalize ? l2_normalize_rows(fwd.encoded.embeddings) : passthrough(fwd.encoded.embeddings);
  fwd.prototypes = normalize ? l2_normalize_rows(params.prototypes) : passthrough(params.prototypes);
  fwd.scores = matmul_transposed(slice_rows(fwd.embeddings.values, 0, num_anchors), fwd.prototypes.values);
  return fwd;
}

ObjectiveResult evaluate_objective(const EncoderParams& params, const BatchForward& fwd,
                                   std::span<const VideoBlock> blocks, const Matrix& codes,
                                   const LossConfig& loss, bool use_coherence) {
  const std::size_t anchors = fwd.num_anchors;
  const Matrix& z = fwd.embeddings.values;
  const Matrix& c = fwd.prototypes.values;

  const Matrix p = row_softmax(fwd.scores, loss.temperature);
  const CrossEntropyResult ce = cross_entropy(p, codes, loss.temperature);

  ObjectiveResult out;
  out.cross_entropy = ce.loss;

  const Matrix z_anchors = slice_rows(z, 0, anchors);
  Matrix grad_z(z.rows(), z.cols());
  {
    const Matrix g = matmul(ce.grad_scores, c);
    std::copy(g.values().begin(), g.values().end(), grad_z.values().begin());
  }
  const Matrix grad_c = transposed_matmul(ce.grad_scores, z_anchors);

  const bool with_positives = z.rows() == 2 * anchors;
  if (use_coherence && with_positives && loss.alpha != 0.0) {
    const Matrix z_positives = slice_rows(z, anchors, anchors);
    const CoherenceResult tc = temporal_coherence(z_anchors, z_positives, blocks);
    out.coherence = tc.loss;
    auto g = grad_z.values();
    auto ga = tc.grad_anchors.values();
    auto gp = tc.grad_positives.values();
    for (std::size_t i = 0; i < ga.size(); ++i) g[i] += loss.alpha * ga[i];
    for (std::size_t i = 0; i < gp.size(); ++i) g[ga.size() + i] += loss.alpha * gp[i];
  }
  out.total = total_loss(out.cross_entropy, out.coherence, loss.alpha);

  const Matrix grad_raw = l2_normalize_rows_backward(fwd.embeddings, grad_z);
  out.grads = backward(params, fwd.encoded.cache, grad_raw);
  out.grads.prototypes = l2_normalize_rows_backward(fwd.prototypes, grad_c);
  return out;
}

Checkpoint TrainResult::checkpoint(const TrainConfig& config) const {
  return {params, adam, {config.loss.temperature, config.normalize}};
}

TrainResult train(const DatasetCatalog& catalog, const TrainConfig& config, std::ostream* progress) {
  if (catalog.size() == 0) throw DataError("train: empty catalog");
  const EncoderShape shape = config.encoder_shape(catalog.feature_dim(), catalog.num_actions());
  if (config.videos_per_batch == 0 || config.batch_size % config.videos_per_batch != 0) {
    throw ContractError("train: batch size must be divisible by videos per batch");
  }
  const std::size_t per_video = config.batch_size / config.videos_per_batch;
  const auto eligible = eligible_videos(catalog, per_video);
  if (progress != nullptr && eligible.size() < catalog.size()) {
    for (const auto& v : catalog.videos()) {
      if (v.num_frames < per_video) {
        *progress << "warning: video " << v.video_id << " has " << v.num_frames
                  << " frames, fewer than the " << per_video << " sampled per video; skipped\n";
      }
    }
  }

  Rng root(config.seed);
  Rng init_rng = root.fork();
  Rng batch_rng = root.fork();

  TrainResult result;
  result.params = init_encoder(shape, init_rng);
  result.adam = init_adam(shape, config.adam);

  const BatchSpec batch_spec{config.batch_size, config.videos_per_batch, config.loss.positive_window, true};
  const bool coherence = uses_coherence(config.mode);
  const TransportKind kind = uses_temporal_prior(config.mode) ? TransportKind::tot : TransportKind::ot;
  const std::size_t iterations = config.resolved_iterations(catalog.size());
  result.log.reserve(iterations);

  ScopedAllocationProbe probe;
  for (std::size_t it = 0; it < iterations; ++it) {
    freeze_prototypes(result.adam, it < config.freeze_iters);

    // Positives are always drawn so every mode sees the same batches.
    const Batch batch = build_batch(catalog, batch_spec, batch_rng);
    const Matrix input = coherence ? vstack(batch.frame_features, batch.positive_features)
                                   : batch.frame_features;
    const BatchForward fwd = forward_batch(result.params, input, batch.size(), config.normalize);
    result.memory.embedding_bytes = std::max(
        result.memory.embedding_bytes, fwd.num_anchors * fwd.encoded.embeddings.cols() * sizeof(double));

    // Pseudo-labels are constants for the gradient step.
    BlockCodes codes = solve_codes(fwd.scores, batch.blocks, kind, config.transport, config.single_prior);
    if (config.renormalize_q) {
      for (std::size_t i = 0; i < codes.values.rows(); ++i) {
        auto r = codes.values.row(i);
        double s = 0.0;
        for (double v : r) s += v;
        for (double& v : r) v /= s;
      }
    }

    ObjectiveResult obj =
        evaluate_objective(result.params, fwd, batch.blocks, codes.values, config.loss, coherence);
    if (!std::isfinite(obj.total)) {
      throw NumericalError("training diverged at iteration " + std::to_string(it));
    }
    adam_step(result.params, obj.grads, result.adam);
    result.log.push_back({it, obj.cross_entropy, obj.coherence, obj.total, codes.worst_error.row,
                          codes.worst_error.col});
  }
  result.memory.peak_rows = probe.stats().max_rows;
  result.memory.peak_elements = probe.stats().max_elements;
  result.memory.allocations = probe.stats().count;
  return result;
}

void write_train_log(std::ostream& os, std::span<const TrainLogEntry> log) {
  os << "iter,L_CE,L_TC,L,row_err,col_err\n";
  const auto flags = os.flags();
  const auto precision = os.precision();
  os << std::setprecision(10);
  for (const auto& e : log) {
    os << e.iteration << ',' << e.cross_entropy << ',' << e.coherence << ',' << e.total << ','
       << e.row_error << ',' << e.col_error << '\n';
  }
  os.flags(flags);
  os.precision(precision);
}

Matrix frame_probabilities(const EncoderParams& params, const Matrix& features,
                           const InferenceSettings& settings, std::size_t chunk_rows) {
  if (chunk_rows == 0) throw ContractError("frame_probabilities: chunk_rows must be positive");
  const Matrix prototypes =
      settings.normalize ? l2_normalize_rows(params.prototypes).values : params.prototypes;
  Matrix out(features.rows(), prototypes.rows());
  for (std::size_t start = 0; start < features.rows(); start += chunk_rows) {
    const std::size_t n = std::min(chunk_rows, features.rows() - start);
    Matrix z = embed(params, slice_rows(features, start, n));
    if (settings.normalize) z = l2_normalize_rows(z).values;
    const Matrix p = row_softmax(matmul_transposed(z, prototypes), settings.temperature);
    std::copy(p.values().begin(), p.values().end(),
              out.values().begin() + static_cast<std::ptrdiff_t>(start * out.cols()));
  }
  return out;
}

void for_each_video_probabilities(
    const EncoderParams& params, const DatasetCatalog& catalog, const InferenceSettings& settings,
    const std::function<void(std::size_t, const Matrix&)>& visit, std::size_t chunk_rows) {
  if (catalog.size() > 0 && catalog.feature_dim() != params.w1.rows()) {
    throw DataError("checkpoint expects " + std::to_string(params.w1.rows()) +
                    "-dimensional features but the dataset has " +
                    std::to_string(catalog.feature_dim()));
  }
  for (std::size_t v = 0; v < catalog.size(); ++v) {
    const FeatureSequence seq = catalog.load_video(v);
    visit(v, frame_probabilities(params, seq.features, settings, chunk_rows));
  }
}

std::vector<Matrix> embed_dataset(const EncoderParams& params, const DatasetCatalog& catalog,
                                  const InferenceSettings& settings, std::size_t chunk_rows) {
  std::vector<Matrix> out;
  out.reserve(catalog.size());
  for_each_video_probabilities(
      params, catalog, settings, [&](std::size_t, const Matrix& p) { out.push_back(p); }, chunk_rows);
  return out;
}

}  // namespace tot
