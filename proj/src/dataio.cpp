#include "tot/dataio.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "tot/errors.hpp"
#include "tot/rng.hpp"

namespace tot {

namespace fs = std::filesystem;

namespace {

constexpr std::array<char, 4> kFeatureMagic{'T', 'O', 'T', 'F'};

void put_u16(std::ostream& os, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint16_t get_u16(const unsigned char* b) {
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(const unsigned char* b) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

void put_f32(std::ostream& os, double value) {
  put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(value)));
}

double get_f32(const unsigned char* b) {
  return static_cast<double>(std::bit_cast<float>(get_u32(b)));
}

FeatureHeader parse_header(std::istream& in, const fs::path& path) {
  unsigned char raw[kFeatureHeaderBytes];
  in.read(reinterpret_cast<char*>(raw), kFeatureHeaderBytes);
  if (in.gcount() < 4 || std::memcmp(raw, kFeatureMagic.data(), 4) != 0) {
    throw DataError(path.string() + ": bad magic (expected \"TOTF\")");
  }
  if (static_cast<std::size_t>(in.gcount()) < kFeatureHeaderBytes) {
    throw DataError(path.string() + ": truncated header");
  }
  const std::uint16_t version = get_u16(raw + 4);
  if (version != kFeatureFormatVersion) {
    throw DataError(path.string() + ": unsupported format version " + std::to_string(version) +
                    " (expected " + std::to_string(kFeatureFormatVersion) + ")");
  }
  return {get_u32(raw + 8), get_u32(raw + 12)};
}

std::ifstream open_for_read(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open for reading");
  return in;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

void write_features(const Matrix& features, const fs::path& path) {
  if (features.rows() > UINT32_MAX || features.cols() > UINT32_MAX) {
    throw ContractError("write_features: matrix too large for TOTF (" + features.shape_string() + ")");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out.write(kFeatureMagic.data(), 4);
  put_u16(out, kFeatureFormatVersion);
  put_u16(out, 0);
  put_u32(out, static_cast<std::uint32_t>(features.rows()));
  put_u32(out, static_cast<std::uint32_t>(features.cols()));
  for (double v : features.values()) put_f32(out, v);
  if (!out) throw DataError(path.string() + ": write failed");
}

void write_features(const FeatureSequence& seq, const fs::path& path) {
  write_features(seq.features, path);
}

FeatureHeader read_feature_header(const fs::path& path) {
  auto in = open_for_read(path);
  return parse_header(in, path);
}

FeatureSequence read_features(const fs::path& path) {
  auto in = open_for_read(path);
  const FeatureHeader header = parse_header(in, path);
  const std::size_t count = static_cast<std::size_t>(header.rows) * header.cols;
  std::vector<unsigned char> payload(count * 4);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (static_cast<std::size_t>(in.gcount()) != payload.size()) {
    throw DataError(path.string() + ": truncated payload (expected " +
                    std::to_string(payload.size()) + " bytes, found " +
                    std::to_string(in.gcount()) + ")");
  }
  FeatureSequence seq;
  seq.video_id = path.stem().string();
  seq.features = Matrix(header.rows, header.cols);
  auto values = seq.features.values();
  for (std::size_t i = 0; i < count; ++i) values[i] = get_f32(payload.data() + 4 * i);
  return seq;
}

Matrix read_feature_rows(const fs::path& path, std::span<const std::size_t> rows) {
  auto in = open_for_read(path);
  const FeatureHeader header = parse_header(in, path);
  Matrix out(rows.size(), header.cols);
  std::vector<unsigned char> buffer(static_cast<std::size_t>(header.cols) * 4);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= header.rows) {
      throw ContractError(path.string() + ": row " + std::to_string(rows[r]) +
                          " out of range (" + std::to_string(header.rows) + " rows)");
    }
    const auto offset = kFeatureHeaderBytes + rows[r] * buffer.size();
    in.seekg(static_cast<std::streamoff>(offset));
    in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(buffer.size()));
    if (static_cast<std::size_t>(in.gcount()) != buffer.size()) {
      throw DataError(path.string() + ": truncated payload at row " + std::to_string(rows[r]));
    }
    auto dst = out.row(r);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] = get_f32(buffer.data() + 4 * c);
  }
  return out;
}

// --- LabelMapping -----------------------------------------------------------

LabelMapping LabelMapping::read(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open mapping file");
  LabelMapping mapping;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    int id = 0;
    std::string name;
    if (!(fields >> id >> name)) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": expected \"<id> <name>\"");
    }
    mapping.insert(id, name);
  }
  if (mapping.size() == 0) throw DataError(path.string() + ": empty mapping");
  return mapping;
}

void LabelMapping::write(const fs::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  for (const auto& [id, name] : by_id_) out << id << ' ' << name << '\n';
}

int LabelMapping::add(const std::string& name) {
  if (auto existing = find(name)) return *existing;
  const int id = by_id_.empty() ? 0 : by_id_.rbegin()->first + 1;
  insert(id, name);
  return id;
}

void LabelMapping::insert(int id, const std::string& name) {
  if (by_id_.count(id) != 0 || by_name_.count(name) != 0) {
    throw DataError("label mapping: duplicate entry " + std::to_string(id) + " " + name);
  }
  by_id_.emplace(id, name);
  by_name_.emplace(name, id);
}

std::optional<int> LabelMapping::find(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

const std::string& LabelMapping::name(int id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw ContractError("label mapping: unknown id " + std::to_string(id));
  return it->second;
}

std::vector<int> read_labels(const fs::path& path, const LabelMapping& mapping) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open label file");
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) {
      ++line_no;
      continue;
    }
    auto id = mapping.find(line);
    if (!id) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": unknown label \"" +
                      line + "\"");
    }
    labels.push_back(*id);
    ++line_no;
  }
  if (labels.empty()) throw DataError(path.string() + ": empty label file");
  return labels;
}

void write_labels(const fs::path& path, std::span<const int> labels, const LabelMapping& mapping) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  for (int id : labels) out << mapping.name(id) << '\n';
}

std::vector<int> split_background_runs(std::span<const int> labels, int background_id,
                                       int start_id, int end_id) {
  std::vector<int> out(labels.begin(), labels.end());
  std::size_t lead = 0;
  while (lead < out.size() && out[lead] == background_id) out[lead++] = start_id;
  // An all-background sequence is treated as one leading run.
  if (lead == out.size()) return out;
  std::size_t tail = out.size();
  while (tail > lead && out[tail - 1] == background_id) out[--tail] = end_id;
  return out;
}

// --- DatasetCatalog ---------------------------------------------------------

DatasetCatalog::DatasetCatalog(std::string activity_name, std::size_t num_actions)
    : activity_name_(std::move(activity_name)), num_actions_(num_actions) {}

void DatasetCatalog::check_dim(const std::string& video_id, std::size_t dim) {
  if (videos_.empty()) {
    dim_ = dim;
    return;
  }
  if (dim != dim_) {
    throw DataError("video " + video_id + " has feature dimension " + std::to_string(dim) +
                    " but the catalog uses " + std::to_string(dim_));
  }
}

void DatasetCatalog::add_video(FeatureSequence seq) {
  if (seq.num_frames() == 0) throw DataError("video " + seq.video_id + " has no frames");
  if (seq.labels && seq.labels->size() != seq.num_frames()) {
    throw DataError("video " + seq.video_id + ": " + std::to_string(seq.labels->size()) +
                    " labels for " + std::to_string(seq.num_frames()) + " frames");
  }
  if (!all_finite(seq.features)) throw DataError("video " + seq.video_id + " has non-finite features");
  check_dim(seq.video_id, seq.features.cols());
  VideoEntry entry;
  entry.video_id = std::move(seq.video_id);
  entry.num_frames = seq.features.rows();
  entry.dim = seq.features.cols();
  entry.labels = std::move(seq.labels);
  entry.features = std::make_shared<const Matrix>(std::move(seq.features));
  videos_.push_back(std::move(entry));
}

void DatasetCatalog::add_video_file(std::string video_id, const fs::path& feature_path,
                                    std::optional<std::vector<int>> labels) {
  const FeatureHeader header = read_feature_header(feature_path);
  if (header.rows == 0) throw DataError(feature_path.string() + ": no frames");
  if (labels && labels->size() != header.rows) {
    throw DataError("video " + video_id + ": " + std::to_string(labels->size()) +
                    " labels for " + std::to_string(header.rows) + " frames");
  }
  check_dim(video_id, header.cols);
  VideoEntry entry;
  entry.video_id = std::move(video_id);
  entry.num_frames = header.rows;
  entry.dim = header.cols;
  entry.labels = std::move(labels);
  entry.feature_path = feature_path;
  videos_.push_back(std::move(entry));
}

std::size_t DatasetCatalog::total_frames() const {
  std::size_t total = 0;
  for (const auto& v : videos_) total += v.num_frames;
  return total;
}

Matrix DatasetCatalog::gather_rows(std::size_t video, std::span<const std::size_t> rows) const {
  const VideoEntry& entry = videos_.at(video);
  if (!entry.features) return read_feature_rows(entry.feature_path, rows);
  Matrix out(rows.size(), entry.dim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= entry.num_frames) {
      throw ContractError("gather_rows: frame " + std::to_string(rows[r]) +
                          " out of range for video " + entry.video_id);
    }
    auto src = entry.features->row(rows[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

FeatureSequence DatasetCatalog::load_video(std::size_t video) const {
  const VideoEntry& entry = videos_.at(video);
  FeatureSequence seq;
  if (entry.features) {
    seq.features = *entry.features;
  } else {
    seq = read_features(entry.feature_path);
  }
  seq.video_id = entry.video_id;
  seq.labels = entry.labels;
  return seq;
}

// --- on-disk layout ---------------------------------------------------------

std::vector<std::string> list_activities(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError(root.string() + ": not a dataset directory");
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::exists(entry.path() / "features")) {
      out.push_back(entry.path().filename().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

DatasetCatalog load_dataset(const fs::path& root, const std::string& activity,
                            const LoadOptions& options) {
  const fs::path dir = root / activity;
  const fs::path feature_dir = dir / "features";
  if (!fs::is_directory(feature_dir)) throw DataError(feature_dir.string() + ": missing");

  LabelMapping mapping;
  const bool has_mapping = fs::exists(dir / "mapping.txt");
  if (has_mapping) mapping = LabelMapping::read(dir / "mapping.txt");

  std::optional<int> background;
  if (options.background_name) {
    background = mapping.find(*options.background_name);
    if (!background) {
      throw DataError((dir / "mapping.txt").string() + ": background action \"" +
                      *options.background_name + "\" not present");
    }
  }
  std::optional<int> start_id;
  std::optional<int> end_id;
  if (options.split_background && background) {
    start_id = mapping.add("action_start");
    end_id = mapping.add("action_end");
  }

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(feature_dir)) {
    if (entry.path().extension() == ".totf") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError(feature_dir.string() + ": no .totf files");

  std::size_t num_actions = mapping.size();
  if (background && !options.split_background) --num_actions;
  DatasetCatalog catalog(activity, num_actions);
  catalog.mapping() = mapping;
  catalog.set_background_id(background);

  for (const auto& file : files) {
    const std::string video_id = file.stem().string();
    std::optional<std::vector<int>> labels;
    const fs::path gt = dir / "groundTruth" / (video_id + ".txt");
    if (has_mapping && fs::exists(gt)) {
      labels = read_labels(gt, mapping);
      if (start_id) labels = split_background_runs(*labels, *background, *start_id, *end_id);
    }
    if (options.lazy) {
      catalog.add_video_file(video_id, file, std::move(labels));
    } else {
      FeatureSequence seq = read_features(file);
      seq.labels = std::move(labels);
      catalog.add_video(std::move(seq));
    }
  }
  return catalog;
}

void save_dataset(const DatasetCatalog& catalog, const fs::path& root) {
  const fs::path dir = root / catalog.activity_name();
  fs::create_directories(dir / "features");
  fs::create_directories(dir / "groundTruth");
  catalog.mapping().write(dir / "mapping.txt");
  for (std::size_t v = 0; v < catalog.size(); ++v) {
    const FeatureSequence seq = catalog.load_video(v);
    write_features(seq, dir / "features" / (seq.video_id + ".totf"));
    if (seq.labels) {
      write_labels(dir / "groundTruth" / (seq.video_id + ".txt"), *seq.labels, catalog.mapping());
    }
  }
}

// --- synthetic data ---------------------------------------------------------

namespace {

// Means with all pairwise distances >= separation. With enough dimensions the
// means are orthogonal and equidistant; otherwise random directions rescaled so
// the closest pair sits exactly at the separation.
Matrix synthetic_means(std::size_t k, std::size_t dim, double separation, Rng& rng) {
  Matrix means(k, dim);
  for (double& v : means.values()) v = rng.normal();
  if (dim >= k) {
    for (std::size_t i = 0; i < k; ++i) {
      auto ri = means.row(i);
      for (std::size_t j = 0; j < i; ++j) {
        auto rj = means.row(j);
        double dot = 0.0;
        for (std::size_t c = 0; c < dim; ++c) dot += ri[c] * rj[c];
        for (std::size_t c = 0; c < dim; ++c) ri[c] -= dot * rj[c];
      }
      double norm = 0.0;
      for (double v : ri) norm += v * v;
      norm = std::sqrt(norm);
      for (double& v : ri) v /= norm;
    }
    for (double& v : means.values()) v *= separation / std::sqrt(2.0);
    return means;
  }
  double closest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      double sq = 0.0;
      for (std::size_t c = 0; c < dim; ++c) sq += std::pow(means(i, c) - means(j, c), 2);
      closest = std::min(closest, std::sqrt(sq));
    }
  }
  for (double& v : means.values()) v *= separation / closest;
  return means;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.num_actions < 2) throw ContractError("generate_synthetic: need at least 2 actions");
  if (spec.mean_segment_len < 2) throw ContractError("generate_synthetic: mean_segment_len < 2");
  if (spec.input_dim == 0) throw ContractError("generate_synthetic: input_dim must be positive");
  if (!(spec.len_jitter >= 0.0 && spec.len_jitter < 1.0)) {
    throw ContractError("generate_synthetic: len_jitter must lie in [0, 1)");
  }
  if (!(spec.cluster_separation > 0.0) || !(spec.noise_sigma > 0.0)) {
    throw ContractError("generate_synthetic: separation and noise must be positive");
  }

  Rng rng(spec.seed);
  SyntheticDataset out{DatasetCatalog(spec.activity_name, spec.num_actions),
                       synthetic_means(spec.num_actions, spec.input_dim,
                                       spec.cluster_separation, rng)};
  for (std::size_t j = 0; j < spec.num_actions; ++j) {
    out.catalog.mapping().insert(static_cast<int>(j), "action_" + std::to_string(j));
  }

  for (std::size_t v = 0; v < spec.num_videos; ++v) {
    std::vector<int> order(spec.num_actions);
    for (std::size_t j = 0; j < order.size(); ++j) order[j] = static_cast<int>(j);
    for (std::size_t p = 0; p + 1 < order.size(); ++p) {
      if (rng.uniform01() < spec.permute_prob) std::swap(order[p], order[p + 1]);
    }
    std::vector<int> kept;
    for (int action : order) {
      if (rng.uniform01() >= spec.drop_prob) kept.push_back(action);
    }
    if (kept.empty()) kept.push_back(order[rng.uniform_index(order.size())]);

    std::vector<int> labels;
    for (int action : kept) {
      const double scale = 1.0 + spec.len_jitter * (2.0 * rng.uniform01() - 1.0);
      const auto len = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::lround(static_cast<double>(spec.mean_segment_len) * scale)));
      labels.insert(labels.end(), len, action);
    }

    FeatureSequence seq;
    char name[32];
    std::snprintf(name, sizeof(name), "video_%03zu", v);
    seq.video_id = name;
    seq.features = Matrix(labels.size(), spec.input_dim);
    for (std::size_t t = 0; t < labels.size(); ++t) {
      auto mean = out.means.row(static_cast<std::size_t>(labels[t]));
      auto row = seq.features.row(t);
      for (std::size_t c = 0; c < row.size(); ++c) {
        // Stored at 32-bit precision so the in-memory data equals what TOTF round-trips.
        row[c] = static_cast<double>(static_cast<float>(mean[c] + spec.noise_sigma * rng.normal()));
      }
    }
    seq.labels = std::move(labels);
    out.catalog.add_video(std::move(seq));
  }
  return out;
}

}  // namespace tot
