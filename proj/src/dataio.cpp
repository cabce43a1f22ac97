// Copyright 2026 The rulstm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "rulstm/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "binary.hpp"
#include "json.hpp"
#include "rulstm/errors.hpp"

namespace rulstm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kFeatureMagic[4] = {'R', 'U', 'F', 'T'};

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

template <class T>
T parse_number(const std::string& field, const std::string& where) {
  T value{};
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw IoError(where + ": bad number '" + field + "'");
  }
  return value;
}

json read_json_file(const fs::path& path) {
  try {
    return json::parse(binary::read_file(path));
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Manifest

void SampleRecord::validate(const Vocabulary& vocab) const {
  if (video_id.empty() || video_id.find_first_of(",\n\r") != std::string::npos) {
    throw ConfigError("sample: invalid video id '" + video_id + "'");
  }
  if (!(start_sec < end_sec)) {
    throw ConfigError("sample " + video_id + ": start_sec must be below end_sec");
  }
  if (action >= vocab.num_actions()) {
    throw ConfigError("sample " + video_id + ": action_id " + std::to_string(action) + " out of range");
  }
  const auto& a = vocab.actions[action];
  if (a.verb != verb || a.noun != noun) {
    throw ConfigError("sample " + video_id + ": action_id " + std::to_string(action) +
                      " does not match verb_id/noun_id");
  }
}

void write_manifest(const fs::path& path, std::span<const SampleRecord> records) {
  std::string out = std::string(kManifestHeader) + "\n";
  for (const auto& r : records) {
    out += r.video_id + "," + format_double(r.start_sec) + "," + format_double(r.end_sec) + "," +
           std::to_string(r.verb) + "," + std::to_string(r.noun) + "," + std::to_string(r.action) +
           "\n";
  }
  binary::write_file(path, out);
}

std::vector<SampleRecord> read_manifest(const fs::path& path) {
  std::istringstream in(binary::read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != kManifestHeader) {
    throw IoError(path.string() + ": expected header '" + kManifestHeader + "'");
  }
  std::vector<SampleRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto f = split_csv_line(line);
    if (f.size() != 6) throw IoError(where + ": expected 6 fields");
    SampleRecord r;
    r.video_id = f[0];
    r.start_sec = parse_number<double>(f[1], where);
    r.end_sec = parse_number<double>(f[2], where);
    r.verb = parse_number<std::size_t>(f[3], where);
    r.noun = parse_number<std::size_t>(f[4], where);
    r.action = parse_number<std::size_t>(f[5], where);
    records.push_back(std::move(r));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Feature container

void FeatureTable::validate() const {
  if (fps_numerator == 0 || fps_denominator == 0) throw ConfigError("features: fps must be positive");
  if (frames.size() != rows.rows()) throw ShapeError("features: frame table does not match row count");
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i] <= frames[i - 1]) throw ConfigError("features: frame ids must be strictly increasing");
  }
}

std::size_t FeatureTable::row_for_frame(std::int64_t frame) const {
  if (frames.empty()) throw ShapeError("features: empty table");
  if (frame <= static_cast<std::int64_t>(frames.front())) return 0;
  const auto target = static_cast<std::uint64_t>(frame);
  const auto it = std::upper_bound(frames.begin(), frames.end(), target,
                                   [](std::uint64_t v, std::uint32_t f) { return v < f; });
  return static_cast<std::size_t>(it - frames.begin()) - 1;
}

std::string serialize_features(const FeatureTable& table) {
  table.validate();
  std::string out(kFeatureMagic, 4);
  binary::put<std::uint32_t>(out, FeatureTable::kVersion);
  binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(table.dim()));
  binary::put<std::uint32_t>(out, table.fps_numerator);
  binary::put<std::uint32_t>(out, table.fps_denominator);
  binary::put<std::uint64_t>(out, table.frames.size());
  for (std::uint32_t f : table.frames) binary::put<std::uint32_t>(out, f);
  for (double v : table.rows.data()) binary::put_f32(out, static_cast<float>(v));
  return out;
}

FeatureTable deserialize_features(const std::string& bytes) {
  binary::Reader in(bytes, "features");
  if (in.get_string(4) != std::string(kFeatureMagic, 4)) in.fail("bad magic");
  const auto version = in.get<std::uint32_t>();
  if (version != FeatureTable::kVersion) in.fail("unsupported version " + std::to_string(version));
  const auto dim = in.get<std::uint32_t>();
  FeatureTable table;
  table.fps_numerator = in.get<std::uint32_t>();
  table.fps_denominator = in.get<std::uint32_t>();
  const auto count = in.get<std::uint64_t>();
  // Sizes are checked against the payload before allocating.
  if (count > in.remaining() / 4 || (dim > 0 && count * dim > (in.remaining() - count * 4) / 4)) {
    in.fail("truncated data");
  }
  table.frames.resize(count);
  for (auto& f : table.frames) f = in.get<std::uint32_t>();
  table.rows = Matrix(count, dim);
  for (double& v : table.rows.data()) v = in.get_f32();
  if (!in.done()) in.fail("trailing bytes");
  try {
    table.validate();
  } catch (const std::exception& e) {
    in.fail(e.what());
  }
  return table;
}

void write_features(const fs::path& path, const FeatureTable& table) {
  binary::write_file(path, serialize_features(table));
}

FeatureTable read_features(const fs::path& path) {
  try {
    return deserialize_features(binary::read_file(path));
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::int64_t frame_at(double seconds, double fps) {
  return static_cast<std::int64_t>(std::floor(seconds * fps + 1e-9));
}

void FeatureStore::add(const std::string& modality, const std::string& video, FeatureTable table) {
  table.validate();
  for (const auto& [key, existing] : tables_) {
    if (key.first == modality && existing.dim() != table.dim()) {
      throw ShapeError("features: modality " + modality + " has dimension " +
                       std::to_string(existing.dim()) + ", got " + std::to_string(table.dim()));
    }
    if (key.first == modality) break;
  }
  tables_[{modality, video}] = std::move(table);
}

bool FeatureStore::contains(const std::string& modality, const std::string& video) const {
  return tables_.count({modality, video}) > 0;
}

const FeatureTable& FeatureStore::table(const std::string& modality, const std::string& video) const {
  const auto it = tables_.find({modality, video});
  if (it == tables_.end()) {
    throw IoError("features: no " + modality + " features for video " + video);
  }
  return it->second;
}

std::vector<std::string> FeatureStore::videos(const std::string& modality) const {
  std::vector<std::string> out;
  for (const auto& [key, t] : tables_) {
    if (key.first == modality) out.push_back(key.second);
  }
  return out;
}

void FeatureStore::save(const fs::path& root) const {
  for (const auto& [key, table] : tables_) {
    const fs::path dir = root / "features" / key.first;
    fs::create_directories(dir);
    write_features(dir / (key.second + ".ruft"), table);
  }
}

FeatureStore FeatureStore::load(const fs::path& root, std::span<const std::string> modalities) {
  FeatureStore store;
  for (const auto& modality : modalities) {
    const fs::path dir = root / "features" / modality;
    if (!fs::is_directory(dir)) throw IoError("features: missing directory " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.path().extension() == ".ruft") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      store.add(modality, file.stem().string(), read_features(file));
    }
  }
  return store;
}

Matrix sample_features(const FeatureStore& store, const std::string& video,
                       const std::string& modality, const TimelineSpec& spec, double action_start) {
  const FeatureTable& table = store.table(modality, video);
  const int steps = spec.total_steps();
  Matrix out(static_cast<std::size_t>(steps), table.dim());
  for (int t = 1; t <= steps; ++t) {
    const auto row = table.row_for_frame(frame_at(step_time(spec, action_start, t), table.fps()));
    std::copy_n(table.rows.row(row).begin(), table.dim(), out.row(t - 1).begin());
  }
  return out;
}

Matrix sample_segment_features(const FeatureStore& store, const std::string& video,
                               const std::string& modality, double start, double end,
                               std::size_t snippets) {
  if (snippets == 0) throw ConfigError("segment: snippet count must be positive");
  if (!(start < end)) throw ConfigError("segment: start must be below end");
  const FeatureTable& table = store.table(modality, video);
  const std::int64_t first = frame_at(start, table.fps());
  Matrix out(snippets, table.dim());
  for (std::size_t t = 1; t <= snippets; ++t) {
    const double time = start + static_cast<double>(t) * (end - start) / static_cast<double>(snippets);
    const std::int64_t frame = std::max(first, frame_at(time, table.fps()) - 1);
    const auto row = table.row_for_frame(frame);
    std::copy_n(table.rows.row(row).begin(), table.dim(), out.row(t - 1).begin());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Detections

Vector bag_of_objects(std::span<const Detection> detections, std::size_t num_classes) {
  Vector out(num_classes, 0.0);
  for (const auto& d : detections) {
    if (d.object_class >= num_classes) {
      throw ConfigError("detection class " + std::to_string(d.object_class) + " out of range (" +
                        std::to_string(num_classes) + " classes)");
    }
    if (!(d.score >= 0.0 && d.score <= 1.0)) {
      throw ConfigError("detection score " + format_double(d.score) + " outside [0, 1]");
    }
  }
  // Summed in class order, then by score, so the result does not depend on
  // the order detections are listed in.
  std::vector<Detection> sorted(detections.begin(), detections.end());
  std::sort(sorted.begin(), sorted.end(), [](const Detection& a, const Detection& b) {
    return a.object_class != b.object_class ? a.object_class < b.object_class : a.score < b.score;
  });
  for (const auto& d : sorted) out[d.object_class] += d.score;
  return out;
}

void write_detections(const fs::path& path, std::span<const DetectionRecord> records) {
  std::string out;
  for (const auto& r : records) {
    json dets = json::array();
    for (const auto& d : r.detections) dets.push_back(json::array({d.object_class, d.score}));
    out += json{{"video_id", r.video_id}, {"frame", r.frame}, {"dets", dets}}.dump() + "\n";
  }
  binary::write_file(path, out);
}

std::vector<DetectionRecord> read_detections(const fs::path& path) {
  std::istringstream in(binary::read_file(path));
  std::vector<DetectionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      DetectionRecord r;
      r.video_id = j.at("video_id").get<std::string>();
      r.frame = j.at("frame").get<std::uint32_t>();
      for (const auto& d : j.at("dets")) {
        r.detections.push_back({d.at(0).get<std::uint32_t>(), d.at(1).get<double>()});
      }
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

std::map<std::string, FeatureTable> features_from_detections(
    std::span<const DetectionRecord> records, std::size_t num_classes,
    std::uint32_t fps_numerator, std::uint32_t fps_denominator) {
  std::map<std::string, std::map<std::uint32_t, Vector>> frames;
  for (const auto& r : records) {
    Vector boo = bag_of_objects(r.detections, num_classes);
    auto [it, inserted] = frames[r.video_id].emplace(r.frame, boo);
    if (!inserted) {
      throw ConfigError("detections: duplicate frame " + std::to_string(r.frame) + " in video " +
                        r.video_id);
    }
  }
  std::map<std::string, FeatureTable> out;
  for (const auto& [video, by_frame] : frames) {
    FeatureTable table;
    table.fps_numerator = fps_numerator;
    table.fps_denominator = fps_denominator;
    table.rows = Matrix(by_frame.size(), num_classes);
    std::size_t i = 0;
    for (const auto& [frame, boo] : by_frame) {
      table.frames.push_back(frame);
      std::copy(boo.begin(), boo.end(), table.rows.row(i++).begin());
    }
    out.emplace(video, std::move(table));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Datasets

std::string_view to_string(Task task) {
  return task == Task::anticipation ? "anticipation" : "early_recognition";
}

Task parse_task(std::string_view s) {
  if (s == "anticipation") return Task::anticipation;
  if (s == "early_recognition" || s == "early") return Task::early_recognition;
  throw ConfigError("task: unknown value '" + std::string(s) + "'");
}

Dataset build_dataset(const FeatureStore& store, std::span<const SampleRecord> records,
                      std::span<const std::string> modalities, const TimelineSpec& spec, Task task,
                      const std::string& split) {
  spec.validate();
  if (modalities.empty()) throw ConfigError("dataset: modalities must not be empty");
  if (task == Task::early_recognition && spec.s_enc != 0) {
    throw ConfigError("dataset: early recognition requires s_enc = 0");
  }
  Dataset ds;
  ds.modalities.assign(modalities.begin(), modalities.end());
  ds.spec = spec;
  ds.task = task;
  ds.samples.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    Sample s;
    s.id = split + "/" + std::to_string(i);
    s.record = r;
    for (const auto& m : modalities) {
      s.features.push_back(task == Task::anticipation
                               ? sample_features(store, r.video_id, m, spec, r.start_sec)
                               : sample_segment_features(store, r.video_id, m, r.start_sec,
                                                         r.end_sec,
                                                         static_cast<std::size_t>(spec.s_ant)));
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

Vocabulary DataDirectory::vocabulary() const { return Vocabulary::load(root / "vocab.json"); }

std::vector<std::size_t> DataDirectory::split_rows(const std::vector<SampleRecord>& all,
                                                   const std::string& split) const {
  std::vector<std::size_t> rows;
  if (split == "all") {
    for (std::size_t i = 0; i < all.size(); ++i) rows.push_back(i);
    return rows;
  }
  const json splits = read_json_file(root / "splits.json");
  if (!splits.contains(split)) throw IoError("splits.json: no split named '" + split + "'");
  const auto videos = splits.at(split).get<std::set<std::string>>();
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (videos.count(all[i].video_id)) rows.push_back(i);
  }
  return rows;
}

std::vector<SampleRecord> DataDirectory::manifest(const std::string& split) const {
  const auto all = read_manifest(root / "manifest.csv");
  std::vector<SampleRecord> out;
  for (std::size_t i : split_rows(all, split)) out.push_back(all[i]);
  return out;
}

std::vector<std::string> DataDirectory::available_modalities() const {
  std::vector<std::string> out;
  const fs::path dir = root / "features";
  if (!fs::is_directory(dir)) throw IoError("missing feature directory " + dir.string());
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) out.push_back(entry.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t DataDirectory::feature_dim(const std::string& modality) const {
  const fs::path dir = root / "features" / modality;
  if (fs::is_directory(dir)) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.path().extension() == ".ruft") return read_features(entry.path()).dim();
    }
  }
  throw IoError("no feature files for modality " + modality);
}

Dataset DataDirectory::load(const std::string& split, std::span<const std::string> modalities,
                            const TimelineSpec& spec, Task task) const {
  const Vocabulary vocab = vocabulary();
  const auto all = read_manifest(root / "manifest.csv");
  const auto rows = split_rows(all, split);
  std::vector<SampleRecord> records;
  for (std::size_t i : rows) {
    all[i].validate(vocab);
    records.push_back(all[i]);
  }
  const FeatureStore store = FeatureStore::load(root, modalities);
  Dataset ds = build_dataset(store, records, modalities, spec, task, split);

  const fs::path meta_path = root / "synth_meta.json";
  if (fs::exists(meta_path)) {
    const json meta = read_json_file(meta_path);
    if (meta.contains("corrupted")) {
      const json& corrupted = meta.at("corrupted");
      for (std::size_t m = 0; m < modalities.size(); ++m) {
        std::set<std::size_t> flagged;
        if (corrupted.contains(modalities[m])) {
          flagged = corrupted.at(modalities[m]).get<std::set<std::size_t>>();
        }
        for (std::size_t k = 0; k < rows.size(); ++k) {
          ds.samples[k].corrupted.push_back(flagged.count(rows[k]) > 0);
        }
      }
    }
  }
  return ds;
}

}  // namespace rulstm
