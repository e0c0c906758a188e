#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace vtf::data {

class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// One synchronized frame/force pair.
struct ForceSample {
  std::filesystem::path frame_path;
  std::optional<std::filesystem::path> depth_path;
  double force_n = 0.0;
  std::string indenter_id;
  double timestamp_s = 0.0;
};

struct IngestOptions {
  double max_gap_s = 0.010;
  double force_min = 1.0;
  double force_max = 15.0;
};

struct IngestResult {
  std::vector<ForceSample> samples;  // ordered by frame timestamp
  int dropped_gap = 0;               // nearest force record too far away
  int dropped_range = 0;             // matched force outside [force_min, force_max]
  std::string indenter_id;
  std::string sensor_id;
};

/// Reads a session directory:
///   frames/<t_ns>.png, optional depth/<t_ns>.png,
///   forces.csv with header `timestamp_s,fz_n`,
///   manifest.json with {indenter_id, sensor_id, notes}.
/// Each frame takes the force record nearest in time (the earlier one on a tie).
IngestResult ingest_session(const std::filesystem::path& dir, const IngestOptions& opt = {});

/// Ingests every session directory directly under root, in name order.
std::vector<ForceSample> ingest_sessions(const std::filesystem::path& root, const IngestOptions& opt = {},
                                         int* dropped = nullptr);

/// Nearest index in sorted times (earlier on ties); times must be non-empty.
std::size_t nearest_index(const std::vector<double>& sorted_times, double t);

/// Indenter ids of one cross-validation fold.
struct FoldSplit {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};

/// Test and validation sizes for n indenters: round(2n/18), at least one each.
std::pair<int, int> holdout_sizes(int n);

/// Folds over the distinct ids (duplicates ignored). The ids are shuffled once
/// with the seed; fold k tests the k-th block of the permutation (blocks are
/// disjoint while the count permits) and validates on the block that follows.
std::vector<FoldSplit> split_by_indenter(const std::vector<std::string>& indenter_ids, std::uint64_t seed,
                                         int folds = 3);

/// Sample indices per partition of one fold.
struct FoldIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

FoldIndices partition(const std::vector<std::string>& sample_indenters, const FoldSplit& split);

void save_split(const std::filesystem::path& path, const std::vector<FoldSplit>& folds, std::uint64_t seed);
std::vector<FoldSplit> load_split(const std::filesystem::path& path);

/// Frame file name for a timestamp: `<t_ns>.png`.
std::string frame_name(double timestamp_s);

/// Writes one session directory (frames, forces.csv, manifest.json). Frame
/// images are written by the caller-supplied callback so this layer stays
/// independent of the image type.
struct SessionWriter {
  explicit SessionWriter(std::filesystem::path dir, std::string indenter_id, std::string sensor_id = "synthetic",
                         std::string notes = "");
  /// Path where the frame at this timestamp belongs; records the force.
  std::filesystem::path add(double timestamp_s, double force_n);
  std::filesystem::path depth_path(double timestamp_s) const;
  void finish();

  std::filesystem::path dir;

private:
  std::string indenter_id_;
  std::string sensor_id_;
  std::string notes_;
  std::vector<std::pair<double, double>> forces_;
};

}  // namespace vtf::data
