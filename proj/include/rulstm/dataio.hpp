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


#ifndef RULSTM_DATAIO_HPP_
#define RULSTM_DATAIO_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rulstm/tensor.hpp"
#include "rulstm/timeline.hpp"
#include "rulstm/vocabulary.hpp"

namespace rulstm {

// ---------------------------------------------------------------------------
// Manifest

struct SampleRecord {
  std::string video_id;
  double start_sec = 0.0;
  double end_sec = 0.0;
  std::size_t verb = 0;
  std::size_t noun = 0;
  std::size_t action = 0;

  // start < end; ids in range and consistent with the vocabulary.
  void validate(const Vocabulary& vocab) const;
  bool operator==(const SampleRecord&) const = default;
};

inline constexpr const char* kManifestHeader = "video_id,start_sec,end_sec,verb_id,noun_id,action_id";

void write_manifest(const std::filesystem::path& path, std::span<const SampleRecord> records);
std::vector<SampleRecord> read_manifest(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Feature container (RUFT), integers little-endian:
//
//   char[4] "RUFT", u32 version = 1, u32 dim, u32 fps_numerator,
//   u32 fps_denominator, u64 row count, u32 frame id per row,
//   then row-major f32 values (row count * dim).
//
// Values are promoted to double on read; tables built in memory should hold
// float-representable values so that a write/read round trip is exact.

struct FeatureTable {
  static constexpr std::uint32_t kVersion = 1;

  std::uint32_t fps_numerator = 1;
  std::uint32_t fps_denominator = 1;
  std::vector<std::uint32_t> frames;  // strictly increasing
  Matrix rows;                        // frames.size() x dim

  std::size_t dim() const { return rows.cols(); }
  double fps() const { return static_cast<double>(fps_numerator) / fps_denominator; }

  void validate() const;
  // Row of the latest frame at or before `frame`; the first row when `frame`
  // precedes the table.
  std::size_t row_for_frame(std::int64_t frame) const;
};

std::string serialize_features(const FeatureTable& table);
FeatureTable deserialize_features(const std::string& bytes);
void write_features(const std::filesystem::path& path, const FeatureTable& table);
FeatureTable read_features(const std::filesystem::path& path);

// Frame index of an absolute time: floor(time * fps), with a 1e-9 guard so
// times that are exact multiples of the frame period do not round down.
std::int64_t frame_at(double seconds, double fps);

// Per (modality, video) feature tables. Safe for concurrent reads.
class FeatureStore {
 public:
  void add(const std::string& modality, const std::string& video, FeatureTable table);
  bool contains(const std::string& modality, const std::string& video) const;
  const FeatureTable& table(const std::string& modality, const std::string& video) const;
  std::vector<std::string> videos(const std::string& modality) const;

  // Layout: <root>/features/<modality>/<video>.ruft
  void save(const std::filesystem::path& root) const;
  static FeatureStore load(const std::filesystem::path& root, std::span<const std::string> modalities);

 private:
  std::map<std::pair<std::string, std::string>, FeatureTable> tables_;
};

// S x D sequence for an action starting at action_start: row t is the frame at
// step_time(t), snapped by frame_at and clamped to the table.
Matrix sample_features(const FeatureStore& store, const std::string& video,
                       const std::string& modality, const TimelineSpec& spec, double action_start);

// N x D sequence over the action itself: snippet t (1..N) ends at
// start + t * (end - start) / N and is represented by its last frame.
Matrix sample_segment_features(const FeatureStore& store, const std::string& video,
                               const std::string& modality, double start, double end,
                               std::size_t snippets);

// ---------------------------------------------------------------------------
// Object detections and bag-of-objects

struct Detection {
  std::uint32_t object_class = 0;
  double score = 0.0;
};

struct DetectionRecord {
  std::string video_id;
  std::uint32_t frame = 0;
  std::vector<Detection> detections;
};

// Component j is the summed confidence of detections of class j.
Vector bag_of_objects(std::span<const Detection> detections, std::size_t num_classes);

// JSON lines: {"video_id": ..., "frame": ..., "dets": [[class, score], ...]}
void write_detections(const std::filesystem::path& path, std::span<const DetectionRecord> records);
std::vector<DetectionRecord> read_detections(const std::filesystem::path& path);

// One table per video from its detection records.
std::map<std::string, FeatureTable> features_from_detections(
    std::span<const DetectionRecord> records, std::size_t num_classes,
    std::uint32_t fps_numerator, std::uint32_t fps_denominator);

// ---------------------------------------------------------------------------
// In-memory datasets

enum class Task { anticipation, early_recognition };

std::string_view to_string(Task task);
Task parse_task(std::string_view s);

struct Sample {
  std::string id;
  SampleRecord record;
  std::vector<Matrix> features;   // one per modality
  std::vector<bool> corrupted;    // synthetic metadata; empty when unknown
};

struct Dataset {
  std::vector<std::string> modalities;
  TimelineSpec spec;
  Task task = Task::anticipation;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

Dataset build_dataset(const FeatureStore& store, std::span<const SampleRecord> records,
                      std::span<const std::string> modalities, const TimelineSpec& spec, Task task,
                      const std::string& split);

// Data directory layout written by the synthesizer:
//   vocab.json           vocabulary
//   manifest.csv         every sample, one row each
//   splits.json          {"train": [video ids], "val": [video ids]}
//   features/<modality>/<video>.ruft
//   synth_meta.json      optional; {"corrupted": {modality: [manifest rows]}}
// The split "all" selects every manifest row.
struct DataDirectory {
  std::filesystem::path root;

  Vocabulary vocabulary() const;
  std::vector<SampleRecord> manifest(const std::string& split) const;
  // Modalities present under features/, sorted by name.
  std::vector<std::string> available_modalities() const;
  std::size_t feature_dim(const std::string& modality) const;
  Dataset load(const std::string& split, std::span<const std::string> modalities,
               const TimelineSpec& spec, Task task) const;

 private:
  std::vector<std::size_t> split_rows(const std::vector<SampleRecord>& all,
                                      const std::string& split) const;
};

}  // namespace rulstm

#endif  // RULSTM_DATAIO_HPP_
