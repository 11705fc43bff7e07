#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tot/checkpoint.hpp"
#include "tot/dataio.hpp"
#include "tot/decode.hpp"
#include "tot/errors.hpp"
#include "tot/eval.hpp"
#include "tot/trainer.hpp"
#include "tot/transport.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace tot;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IntArray = py::array_t<int, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw ContractError("expected a 2-D array, got " + std::to_string(a.ndim()) + "-D");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.values().begin());
  return m;
}

Array to_array(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

std::vector<int> to_labels(const IntArray& a) {
  if (a.ndim() != 1) throw ContractError("expected a 1-D label array");
  return {a.data(), a.data() + a.size()};
}

IntArray to_int_array(const std::vector<int>& v) {
  IntArray out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::dict codes_dict(const CodeMatrix& q) {
  return py::dict("Q"_a = to_array(q.values), "row_error"_a = q.error.row, "col_error"_a = q.error.col,
                  "iterations"_a = q.iterations);
}

OverlapRule parse_overlap(const std::string& s) {
  if (s == "gt") return OverlapRule::ground_truth_fraction;
  if (s == "iou") return OverlapRule::iou;
  throw ContractError("overlap must be \"gt\" or \"iou\", got \"" + s + "\"");
}

DatasetCatalog catalog_from(const std::vector<Array>& videos, std::size_t num_clusters) {
  DatasetCatalog cat("python", num_clusters);
  for (std::size_t i = 0; i < videos.size(); ++i) {
    cat.add_video({"video_" + std::to_string(i), to_matrix(videos[i]), std::nullopt, std::nullopt});
  }
  return cat;
}

// A trained encoder plus prototypes.
struct Model {
  Checkpoint checkpoint;
  std::vector<TrainLogEntry> log;

  Array probabilities(const Array& features) const {
    return to_array(frame_probabilities(checkpoint.params, to_matrix(features), checkpoint.inference));
  }

  py::tuple segment(const Array& features) const {
    const Matrix p = frame_probabilities(checkpoint.params, to_matrix(features), checkpoint.inference);
    const SegmentationResult r = viterbi_fixed_order(log_probabilities(p));
    return py::make_tuple(to_int_array(r.labels), r.log_score);
  }

  Array training_log() const {
    Array out({log.size(), std::size_t{6}});
    auto v = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < log.size(); ++i) {
      const auto& e = log[i];
      v(i, 0) = static_cast<double>(e.iteration);
      v(i, 1) = e.cross_entropy;
      v(i, 2) = e.coherence;
      v(i, 3) = e.total;
      v(i, 4) = e.row_error;
      v(i, 5) = e.col_error;
    }
    return out;
  }
};

Model train_model(const std::vector<Array>& videos, std::size_t num_clusters, const std::string& mode,
                  std::size_t batch_size, std::size_t videos_per_batch, std::size_t iterations,
                  std::size_t freeze_iters, std::size_t embed_dim, double rho, double sigma, double epsilon,
                  std::size_t sinkhorn_iters, double temperature, double alpha, std::size_t window, double lr,
                  double weight_decay, std::uint64_t seed) {
  TrainConfig cfg;
  const auto m = parse_train_mode(mode);
  if (!m) throw ContractError("unknown mode \"" + mode + "\"");
  cfg.mode = *m;
  cfg.batch_size = batch_size;
  cfg.videos_per_batch = videos_per_batch;
  cfg.iterations = iterations;
  cfg.freeze_iters = freeze_iters;
  cfg.embed_dim = embed_dim;
  cfg.transport.rho = rho;
  cfg.transport.sigma = sigma;
  cfg.transport.epsilon = epsilon;
  cfg.transport.iterations = sinkhorn_iters;
  cfg.loss.temperature = temperature;
  cfg.loss.alpha = alpha;
  cfg.loss.positive_window = window;
  cfg.adam.learning_rate = lr;
  cfg.adam.weight_decay = weight_decay;
  cfg.seed = seed;
  const DatasetCatalog cat = catalog_from(videos, num_clusters);
  TrainResult r;
  {
    py::gil_scoped_release release;
    r = train(cat, cfg);
  }
  return {r.checkpoint(cfg), std::move(r.log)};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Temporal optimal transport for unsupervised action segmentation";

  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_IOError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("temporal_prior", [](std::size_t b, std::size_t k, double sigma) { return to_array(temporal_prior(b, k, sigma)); },
        "frames"_a, "clusters"_a, "sigma"_a = 2.5);
  m.def("sinkhorn_ot",
        [](const Array& s, double epsilon, std::size_t iterations, double tolerance) {
          return codes_dict(sinkhorn_ot(to_matrix(s), epsilon, iterations, tolerance));
        },
        "scores"_a, "epsilon"_a = 0.05, "iterations"_a = 3, "tolerance"_a = 0.0);
  m.def("sinkhorn_tot",
        [](const Array& s, std::optional<Array> prior, double rho, double sigma, std::size_t iterations,
           double tolerance) {
          const Matrix scores = to_matrix(s);
          if (prior) return codes_dict(sinkhorn_tot(scores, to_matrix(*prior), rho, iterations, tolerance));
          return codes_dict(sinkhorn_tot_log_prior(scores, log_temporal_prior(scores.rows(), scores.cols(), sigma),
                                                   rho, iterations, tolerance));
        },
        "scores"_a, "prior"_a = py::none(), "rho"_a = 0.07, "sigma"_a = 2.5, "iterations"_a = 3,
        "tolerance"_a = 0.0, "Temporal OT; the Gaussian prior of width sigma is used unless prior is given.");

  m.def("viterbi",
        [](const Array& log_probs) {
          const SegmentationResult r = viterbi_fixed_order(to_matrix(log_probs));
          return py::make_tuple(to_int_array(r.labels), r.log_score);
        },
        "log_probs"_a, "Fixed-order decoding: clusters 0..K-1 in order, each at least one frame.");
  m.def("segments", [](const IntArray& labels) {
    py::list out;
    for (const auto& s : segments_from_labels(to_labels(labels))) out.append(py::make_tuple(s.label, s.start, s.end));
    return out;
  });

  m.def("hungarian_match",
        [](const IntArray& pred, const IntArray& gt, std::size_t num_clusters, std::optional<int> background) {
          const ClusterMapping mp = hungarian_match(to_labels(pred), to_labels(gt), num_clusters, background);
          return py::make_tuple(mp.cluster_to_action, mp.matched_frames);
        },
        "predicted"_a, "ground_truth"_a, "num_clusters"_a, "background"_a = py::none());
  m.def("evaluate",
        [](const std::vector<IntArray>& preds, const std::vector<IntArray>& gts, std::size_t num_clusters,
           std::optional<int> background, const std::string& overlap) {
          if (preds.size() != gts.size()) throw ContractError("evaluate: prediction and ground-truth counts differ");
          std::vector<VideoPrediction> videos;
          for (std::size_t i = 0; i < preds.size(); ++i)
            videos.push_back({"video_" + std::to_string(i), to_labels(preds[i]), to_labels(gts[i])});
          const EvalReport r = evaluate_activity("python", videos, num_clusters, {background, parse_overlap(overlap)});
          std::vector<double> per_video;
          for (const auto& v : r.per_video) per_video.push_back(v.f1);
          return py::dict("mof"_a = r.mof, "f1"_a = r.f1, "mapping"_a = r.mapping.cluster_to_action,
                          "per_video_f1"_a = per_video);
        },
        "predicted"_a, "ground_truth"_a, "num_clusters"_a, "background"_a = py::none(), "overlap"_a = "gt",
        "Activity-level Hungarian matching, then MOF and mean per-video F1.");

  m.def("generate_synthetic",
        [](std::size_t num_videos, std::size_t num_actions, std::size_t input_dim, std::size_t segment_len,
           double separation, double noise, double permute, double drop, std::uint64_t seed) {
          SyntheticSpec spec;
          spec.num_videos = num_videos;
          spec.num_actions = num_actions;
          spec.input_dim = input_dim;
          spec.mean_segment_len = segment_len;
          spec.cluster_separation = separation;
          spec.noise_sigma = noise;
          spec.permute_prob = permute;
          spec.drop_prob = drop;
          spec.seed = seed;
          const SyntheticDataset data = generate_synthetic(spec);
          py::list features, labels;
          for (std::size_t v = 0; v < data.catalog.size(); ++v) {
            const FeatureSequence seq = data.catalog.load_video(v);
            features.append(to_array(seq.features));
            labels.append(to_int_array(*seq.labels));
          }
          return py::make_tuple(features, labels, to_array(data.means));
        },
        "num_videos"_a = 20, "num_actions"_a = 5, "input_dim"_a = 16, "segment_len"_a = 40, "separation"_a = 1.0,
        "noise"_a = 0.1, "permute"_a = 0.0, "drop"_a = 0.0, "seed"_a = 0,
        "Returns (features, labels, means): per-video arrays and the per-action means.");

  py::class_<Model>(m, "Model")
      .def_static("train", &train_model, "videos"_a, "num_clusters"_a, "mode"_a = "tot", "batch_size"_a = 512,
                  "videos_per_batch"_a = 2, "iterations"_a = 1000, "freeze_iters"_a = 100, "embed_dim"_a = 30,
                  "rho"_a = 0.07, "sigma"_a = 2.5, "epsilon"_a = 0.05, "sinkhorn_iters"_a = 3,
                  "temperature"_a = 0.1, "alpha"_a = 1.0, "window"_a = 30, "lr"_a = 1e-3, "weight_decay"_a = 1e-4,
                  "seed"_a = 0)
      .def_static("load", [](const std::string& path) { return Model{load_checkpoint(path), {}}; })
      .def("save", [](const Model& self, const std::string& path) { save_checkpoint(self.checkpoint, path); })
      .def("probabilities", &Model::probabilities, "features"_a)
      .def("segment", &Model::segment, "features"_a)
      .def_property_readonly("log", &Model::training_log)
      .def_property_readonly("prototypes", [](const Model& self) { return to_array(self.checkpoint.params.prototypes); })
      .def_property_readonly("num_clusters", [](const Model& self) { return self.checkpoint.params.prototypes.rows(); });
}
