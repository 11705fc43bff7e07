#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tot/matrix.hpp"

namespace tot {

// TOTF layout (little-endian):
//   0  char[4]  magic "TOTF"
//   4  u16      format version (kFeatureFormatVersion)
//   6  u16      reserved, zero
//   8  u32      rows
//  12  u32      cols
//  16  f32[rows*cols] row-major payload
inline constexpr std::uint16_t kFeatureFormatVersion = 1;
inline constexpr std::size_t kFeatureHeaderBytes = 16;

struct FeatureSequence {
  std::string video_id;
  Matrix features;  // frames x input dimension
  std::optional<std::vector<int>> labels;
  std::optional<double> fps;

  std::size_t num_frames() const { return features.rows(); }
};

struct FeatureHeader {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
};

void write_features(const FeatureSequence& seq, const std::filesystem::path& path);
void write_features(const Matrix& features, const std::filesystem::path& path);
// The video id is taken from the file stem. Values are promoted to double.
FeatureSequence read_features(const std::filesystem::path& path);
FeatureHeader read_feature_header(const std::filesystem::path& path);
// Reads only the requested rows, seeking within the file.
Matrix read_feature_rows(const std::filesystem::path& path, std::span<const std::size_t> rows);

// Bidirectional action-name <-> id table. On disk: one "id name" pair per line.
class LabelMapping {
 public:
  LabelMapping() = default;

  static LabelMapping read(const std::filesystem::path& path);
  void write(const std::filesystem::path& path) const;

  // Adds `name` under the next free id, or returns its existing id.
  int add(const std::string& name);
  void insert(int id, const std::string& name);

  std::optional<int> find(const std::string& name) const;
  const std::string& name(int id) const;
  bool contains(int id) const { return by_id_.count(id) != 0; }
  std::size_t size() const { return by_id_.size(); }
  const std::map<int, std::string>& entries() const { return by_id_; }

 private:
  std::map<int, std::string> by_id_;
  std::map<std::string, int> by_name_;
};

std::vector<int> read_labels(const std::filesystem::path& path, const LabelMapping& mapping);
void write_labels(const std::filesystem::path& path, std::span<const int> labels,
                  const LabelMapping& mapping);

// Relabels the leading run of `background_id` frames to `start_id` and the
// trailing run to `end_id`. Interior background frames keep `background_id`.
std::vector<int> split_background_runs(std::span<const int> labels, int background_id,
                                       int start_id, int end_id);

struct VideoEntry {
  std::string video_id;
  std::size_t num_frames = 0;
  std::size_t dim = 0;
  std::optional<std::vector<int>> labels;
  // Exactly one of these is set: resident features or a TOTF file to stream from.
  std::shared_ptr<const Matrix> features;
  std::filesystem::path feature_path;
};

class DatasetCatalog {
 public:
  DatasetCatalog() = default;
  DatasetCatalog(std::string activity_name, std::size_t num_actions);

  const std::string& activity_name() const { return activity_name_; }
  std::size_t num_actions() const { return num_actions_; }
  void set_num_actions(std::size_t k) { num_actions_ = k; }

  LabelMapping& mapping() { return mapping_; }
  const LabelMapping& mapping() const { return mapping_; }

  std::optional<int> background_id() const { return background_id_; }
  void set_background_id(std::optional<int> id) { background_id_ = id; }

  // Rejects a feature dimension that differs from videos already present.
  void add_video(FeatureSequence seq);
  void add_video_file(std::string video_id, const std::filesystem::path& feature_path,
                      std::optional<std::vector<int>> labels);

  const std::vector<VideoEntry>& videos() const { return videos_; }
  std::size_t size() const { return videos_.size(); }
  std::size_t feature_dim() const { return dim_; }
  std::size_t total_frames() const;

  Matrix gather_rows(std::size_t video, std::span<const std::size_t> rows) const;
  FeatureSequence load_video(std::size_t video) const;

 private:
  void check_dim(const std::string& video_id, std::size_t dim);

  std::string activity_name_;
  std::size_t num_actions_ = 0;
  LabelMapping mapping_;
  std::optional<int> background_id_;
  std::vector<VideoEntry> videos_;
  std::size_t dim_ = 0;
};

struct LoadOptions {
  // Stream features from disk on demand instead of holding them in memory.
  bool lazy = true;
  // Name of the background action in mapping.txt, if any.
  std::optional<std::string> background_name;
  // Split leading/trailing background runs into "action_start"/"action_end".
  bool split_background = false;
};

// Layout: root/<activity>/features/<video>.totf,
//         root/<activity>/groundTruth/<video>.txt,
//         root/<activity>/mapping.txt
DatasetCatalog load_dataset(const std::filesystem::path& root, const std::string& activity,
                            const LoadOptions& options = {});
void save_dataset(const DatasetCatalog& catalog, const std::filesystem::path& root);
std::vector<std::string> list_activities(const std::filesystem::path& root);

struct SyntheticSpec {
  std::string activity_name = "synthetic";
  std::size_t num_videos = 20;
  std::size_t num_actions = 5;
  std::size_t input_dim = 16;
  std::size_t mean_segment_len = 40;
  double len_jitter = 0.25;
  double cluster_separation = 1.0;
  double noise_sigma = 0.1;
  double permute_prob = 0.0;
  double drop_prob = 0.0;
  std::uint64_t seed = 0;
};

struct SyntheticDataset {
  DatasetCatalog catalog;
  // Per-action mean vectors, num_actions x input_dim.
  Matrix means;
};

SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace tot
