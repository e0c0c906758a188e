#include "vtf/dataio.hpp"

#include "vtf/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

namespace fs = std::filesystem;

namespace vtf::data {

namespace {

struct ForceRecord {
  double t;
  double f;
};

std::vector<ForceRecord> read_forces(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing force log: " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "timestamp_s,fz_n")
    throw DataError(path.string() + ":1: expected header 'timestamp_s,fz_n'");
  std::vector<ForceRecord> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 2) throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 2 fields");
    try {
      out.push_back({parse_real(fields[0]), parse_real(fields[1])});
    } catch (const std::invalid_argument& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  std::sort(out.begin(), out.end(), [](const ForceRecord& a, const ForceRecord& b) {
    return a.t != b.t ? a.t < b.t : a.f < b.f;
  });
  return out;
}

}  // namespace

std::size_t nearest_index(const std::vector<double>& sorted_times, double t) {
  if (sorted_times.empty()) throw DataError("nearest_index: no records");
  const auto it = std::lower_bound(sorted_times.begin(), sorted_times.end(), t);
  if (it == sorted_times.begin()) return 0;
  if (it == sorted_times.end()) return sorted_times.size() - 1;
  const std::size_t hi = std::size_t(it - sorted_times.begin());
  return (t - sorted_times[hi - 1] <= sorted_times[hi] - t) ? hi - 1 : hi;
}

std::string frame_name(double timestamp_s) {
  return std::to_string(std::llround(timestamp_s * 1e9)) + ".png";
}

IngestResult ingest_session(const fs::path& dir, const IngestOptions& opt) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw DataError("missing manifest: " + manifest_path.string());
  IngestResult result;
  {
    std::ifstream in(manifest_path);
    try {
      const auto j = nlohmann::json::parse(in);
      result.indenter_id = j.at("indenter_id").get<std::string>();
      result.sensor_id = j.value("sensor_id", "");
    } catch (const nlohmann::json::exception& e) {
      throw DataError(manifest_path.string() + ": " + e.what());
    }
  }

  const fs::path frames_dir = dir / "frames";
  std::vector<std::pair<long long, fs::path>> frames;
  if (fs::is_directory(frames_dir)) {
    for (const auto& entry : fs::directory_iterator(frames_dir)) {
      if (entry.path().extension() != ".png") continue;
      try {
        frames.emplace_back(parse_integer(entry.path().stem().string()), entry.path());
      } catch (const std::invalid_argument&) {
        throw DataError("frame name is not a nanosecond timestamp: " + entry.path().string());
      }
    }
  }
  if (frames.empty()) throw DataError("empty session: no frames in " + frames_dir.string());
  std::sort(frames.begin(), frames.end());

  const std::vector<ForceRecord> forces = read_forces(dir / "forces.csv");
  if (forces.empty()) throw DataError("empty session: no force records in " + (dir / "forces.csv").string());
  std::vector<double> times;
  times.reserve(forces.size());
  for (const auto& r : forces) times.push_back(r.t);

  for (const auto& [t_ns, path] : frames) {
    const double t = double(t_ns) * 1e-9;
    const ForceRecord& rec = forces[nearest_index(times, t)];
    if (std::abs(rec.t - t) > opt.max_gap_s + 1e-12) {
      ++result.dropped_gap;
      continue;
    }
    if (rec.f < opt.force_min || rec.f > opt.force_max) {
      ++result.dropped_range;
      continue;
    }
    ForceSample s;
    s.frame_path = path;
    const fs::path depth = dir / "depth" / path.filename();
    if (fs::exists(depth)) s.depth_path = depth;
    s.force_n = rec.f;
    s.indenter_id = result.indenter_id;
    s.timestamp_s = t;
    result.samples.push_back(std::move(s));
  }
  return result;
}

std::vector<ForceSample> ingest_sessions(const fs::path& root, const IngestOptions& opt, int* dropped) {
  if (!fs::is_directory(root)) throw DataError("not a directory: " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw DataError("no sessions under " + root.string());
  std::vector<ForceSample> out;
  int drops = 0;
  for (const auto& d : dirs) {
    IngestResult r = ingest_session(d, opt);
    drops += r.dropped_gap + r.dropped_range;
    out.insert(out.end(), std::make_move_iterator(r.samples.begin()), std::make_move_iterator(r.samples.end()));
  }
  if (dropped) *dropped = drops;
  return out;
}

std::pair<int, int> holdout_sizes(int n) {
  const int k = std::max(1, int(std::lround(2.0 * n / 18.0)));
  return {k, k};
}

std::vector<FoldSplit> split_by_indenter(const std::vector<std::string>& indenter_ids, std::uint64_t seed, int folds) {
  std::vector<std::string> ids(indenter_ids.begin(), indenter_ids.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  const int n = int(ids.size());
  if (n < 3) throw DataError("split_by_indenter: need at least 3 distinct indenters, got " + std::to_string(n));
  if (folds < 1) throw DataError("split_by_indenter: folds must be >= 1");
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit draw so the permutation does not depend on the
  // standard library's shuffle implementation.
  for (int i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(ids[std::size_t(i)], ids[std::size_t(pick(rng))]);
  }
  const auto [n_test, n_val] = holdout_sizes(n);
  std::vector<FoldSplit> out;
  for (int k = 0; k < folds; ++k) {
    FoldSplit f;
    const int start = (k * n_test) % n;
    for (int i = 0; i < n; ++i) {
      const std::string& id = ids[std::size_t((start + i) % n)];
      if (i < n_test)
        f.test.push_back(id);
      else if (i < n_test + n_val)
        f.val.push_back(id);
      else
        f.train.push_back(id);
    }
    out.push_back(std::move(f));
  }
  return out;
}

FoldIndices partition(const std::vector<std::string>& sample_indenters, const FoldSplit& split) {
  const std::set<std::string> train(split.train.begin(), split.train.end());
  const std::set<std::string> val(split.val.begin(), split.val.end());
  const std::set<std::string> test(split.test.begin(), split.test.end());
  FoldIndices out;
  for (std::size_t i = 0; i < sample_indenters.size(); ++i) {
    const std::string& id = sample_indenters[i];
    if (train.count(id))
      out.train.push_back(i);
    else if (val.count(id))
      out.val.push_back(i);
    else if (test.count(id))
      out.test.push_back(i);
  }
  return out;
}

void save_split(const fs::path& path, const std::vector<FoldSplit>& folds, std::uint64_t seed) {
  nlohmann::json j;
  j["seed"] = seed;
  j["folds"] = nlohmann::json::array();
  for (const FoldSplit& f : folds) j["folds"].push_back({{"train", f.train}, {"val", f.val}, {"test", f.test}});
  std::ofstream out(path);
  if (!out) throw DataError("cannot write split file: " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<FoldSplit> load_split(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open split file: " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    std::vector<FoldSplit> out;
    for (const auto& f : j.at("folds"))
      out.push_back({f.at("train").get<std::vector<std::string>>(), f.at("val").get<std::vector<std::string>>(),
                     f.at("test").get<std::vector<std::string>>()});
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

SessionWriter::SessionWriter(fs::path dir_, std::string indenter_id, std::string sensor_id, std::string notes)
    : dir(std::move(dir_)), indenter_id_(std::move(indenter_id)), sensor_id_(std::move(sensor_id)),
      notes_(std::move(notes)) {
  fs::create_directories(dir / "frames");
}

fs::path SessionWriter::add(double timestamp_s, double force_n) {
  forces_.emplace_back(timestamp_s, force_n);
  return dir / "frames" / frame_name(timestamp_s);
}

fs::path SessionWriter::depth_path(double timestamp_s) const {
  return dir / "depth" / frame_name(timestamp_s);
}

void SessionWriter::finish() {
  {
    std::ofstream out(dir / "forces.csv");
    if (!out) throw DataError("cannot write " + (dir / "forces.csv").string());
    out << "timestamp_s,fz_n\n";
    for (const auto& [t, f] : forces_) out << format_real(t) << ',' << format_real(f) << '\n';
  }
  nlohmann::json m{{"indenter_id", indenter_id_}, {"sensor_id", sensor_id_}, {"notes", notes_}};
  std::ofstream out(dir / "manifest.json");
  if (!out) throw DataError("cannot write " + (dir / "manifest.json").string());
  out << m.dump(2) << '\n';
}

}  // namespace vtf::data
