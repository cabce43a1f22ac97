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


#include "rulstm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "binary.hpp"
#include "rulstm/errors.hpp"
#include "rulstm/rng.hpp"

namespace rulstm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Stream ids for Rng::derive.
enum Stream : std::uint64_t { kVocabulary = 1, kPrototypes, kLabels, kCorruption, kFrames };

std::string_view kind_name(SynthModality::Kind k) {
  return k == SynthModality::Kind::dense ? "dense" : "objects";
}

SynthModality::Kind parse_kind(const std::string& s) {
  if (s == "dense") return SynthModality::Kind::dense;
  if (s == "objects") return SynthModality::Kind::objects;
  throw ConfigError("synth.modalities.kind: unknown value '" + s + "'");
}

std::size_t frames_for(double seconds, double alpha) {
  return static_cast<std::size_t>(std::llround(seconds / alpha));
}

double to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

// Number of k-subsets of n items, saturating at `cap`.
std::size_t choose_capped(std::size_t n, std::size_t k, std::size_t cap) {
  if (k > n) return 0;
  double c = 1.0;
  for (std::size_t i = 0; i < k; ++i) {
    c = c * static_cast<double>(n - i) / static_cast<double>(i + 1);
    if (c >= static_cast<double>(cap)) return cap;
  }
  return static_cast<std::size_t>(std::llround(c));
}

struct FrameInfo {
  double evidence = 0.0;
  std::ptrdiff_t row = -1;  // manifest row whose window or action holds the frame
};

}  // namespace

double SynthConfig::modality_noise(std::size_t m) const {
  return modalities.at(m).noise >= 0.0 ? modalities[m].noise : noise;
}

double SynthConfig::modality_corruption(std::size_t m) const {
  return modalities.at(m).corruption >= 0.0 ? modalities[m].corruption : corruption;
}

std::pair<std::uint32_t, std::uint32_t> SynthConfig::fps_fraction() const {
  constexpr std::uint64_t kScale = 1000000;
  const auto den = static_cast<std::uint64_t>(std::llround(alpha * kScale));
  const std::uint64_t g = std::gcd(kScale, den);
  return {static_cast<std::uint32_t>(kScale / g), static_cast<std::uint32_t>(den / g)};
}

void SynthConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("synth." + field + " " + why);
  };
  if (num_verbs == 0) fail("num_verbs", "must be positive");
  if (num_nouns == 0) fail("num_nouns", "must be positive");
  if (num_actions == 0) fail("num_actions", "must be positive");
  if (num_actions > num_verbs * num_nouns) fail("num_actions", "exceeds num_verbs * num_nouns");
  if (modalities.empty()) fail("modalities", "must not be empty");
  std::set<std::string> names;
  for (std::size_t m = 0; m < modalities.size(); ++m) {
    const auto& mod = modalities[m];
    const std::string field = "modalities[" + std::to_string(m) + "]";
    if (mod.name.empty() || mod.name.find_first_of("/\\. ") != std::string::npos) {
      fail(field + ".name", "must be a plain non-empty name");
    }
    if (!names.insert(mod.name).second) fail(field + ".name", "repeats '" + mod.name + "'");
    if (mod.dim == 0) fail(field + ".dim", "must be positive");
    if (modality_corruption(m) < 0.0 || modality_corruption(m) > 1.0) {
      fail(field + ".corruption", "must lie in [0, 1]");
    }
    if (mod.kind == SynthModality::Kind::objects) {
      if (objects_per_action == 0) fail("objects_per_action", "must be positive");
      if (choose_capped(mod.dim, objects_per_action, num_actions) < num_actions) {
        fail(field + ".dim", "too small for distinct object sets per action");
      }
    }
  }
  if (train_samples == 0) fail("train_samples", "must be positive");
  if (actions_per_video == 0) fail("actions_per_video", "must be positive");
  if (!(alpha > 0.0) || alpha > 1000.0) fail("alpha", "must lie in (0, 1000]");
  const auto [num, den] = fps_fraction();
  if (std::abs(static_cast<double>(den) / num - alpha) > 1e-12) {
    fail("alpha", "must be a multiple of 1e-6");
  }
  if (window_steps == 0) fail("window_steps", "must be positive");
  if (frames_for(action_duration, alpha) == 0) fail("action_duration", "must span at least one frame");
  if (!(gap >= 0.0)) fail("gap", "must be non-negative");
  if (!(signal >= 0.0)) fail("signal", "must be non-negative");
  if (!(noise >= 0.0)) fail("noise", "must be non-negative");
  if (!(ramp_power > 0.0)) fail("ramp_power", "must be positive");
  if (!(in_action_floor >= 0.0 && in_action_floor <= 1.0)) fail("in_action_floor", "must lie in [0, 1]");
  if (!(corruption >= 0.0 && corruption <= 1.0)) fail("corruption", "must lie in [0, 1]");
}

json SynthConfig::to_json() const {
  json mods = json::array();
  for (const auto& m : modalities) {
    json j{{"name", m.name}, {"dim", m.dim}, {"kind", kind_name(m.kind)}};
    if (m.noise >= 0.0) j["noise"] = m.noise;
    if (m.corruption >= 0.0) j["corruption"] = m.corruption;
    mods.push_back(j);
  }
  return json{{"num_verbs", num_verbs},
              {"num_nouns", num_nouns},
              {"num_actions", num_actions},
              {"modalities", mods},
              {"train_samples", train_samples},
              {"val_samples", val_samples},
              {"actions_per_video", actions_per_video},
              {"alpha", alpha},
              {"window_steps", window_steps},
              {"action_duration", action_duration},
              {"gap", gap},
              {"signal", signal},
              {"noise", noise},
              {"ramp_power", ramp_power},
              {"in_action_floor", in_action_floor},
              {"corruption", corruption},
              {"objects_per_action", objects_per_action},
              {"many_shot_threshold", many_shot_threshold},
              {"seed", seed}};
}

SynthConfig SynthConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("synth: config must be a JSON object");
  SynthConfig c;
  const json defaults = c.to_json();
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw ConfigError("synth." + key + " is not a known field");
  }
  auto get = [&j](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const json::exception&) {
      throw ConfigError(std::string("synth.") + key + " has the wrong type");
    }
  };
  get("num_verbs", c.num_verbs);
  get("num_nouns", c.num_nouns);
  get("num_actions", c.num_actions);
  get("train_samples", c.train_samples);
  get("val_samples", c.val_samples);
  get("actions_per_video", c.actions_per_video);
  get("alpha", c.alpha);
  get("window_steps", c.window_steps);
  get("action_duration", c.action_duration);
  get("gap", c.gap);
  get("signal", c.signal);
  get("noise", c.noise);
  get("ramp_power", c.ramp_power);
  get("in_action_floor", c.in_action_floor);
  get("corruption", c.corruption);
  get("objects_per_action", c.objects_per_action);
  get("many_shot_threshold", c.many_shot_threshold);
  get("seed", c.seed);
  if (j.contains("modalities")) {
    c.modalities.clear();
    for (const auto& m : j.at("modalities")) {
      SynthModality mod;
      try {
        mod.name = m.at("name").get<std::string>();
        mod.dim = m.at("dim").get<std::size_t>();
        if (m.contains("kind")) mod.kind = parse_kind(m.at("kind").get<std::string>());
        if (m.contains("noise")) mod.noise = m.at("noise").get<double>();
        if (m.contains("corruption")) mod.corruption = m.at("corruption").get<double>();
      } catch (const json::exception& e) {
        throw ConfigError(std::string("synth.modalities: ") + e.what());
      }
      c.modalities.push_back(std::move(mod));
    }
  }
  return c;
}

SynthDataset synth_generate(const SynthConfig& config) {
  config.validate();
  const Rng root(config.seed);
  const std::size_t num_mod = config.modalities.size();
  const std::size_t K = config.num_actions;
  SynthDataset data;

  // Vocabulary: K distinct (verb, noun) pairs in random order.
  {
    Rng rng = root.derive({kVocabulary});
    auto& vocab = data.vocabulary;
    for (std::size_t v = 0; v < config.num_verbs; ++v) vocab.verbs.push_back("verb" + std::to_string(v));
    for (std::size_t n = 0; n < config.num_nouns; ++n) vocab.nouns.push_back("noun" + std::to_string(n));
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t v = 0; v < config.num_verbs; ++v) {
      for (std::size_t n = 0; n < config.num_nouns; ++n) pairs.emplace_back(v, n);
    }
    rng.shuffle(std::span(pairs));
    for (std::size_t a = 0; a < K; ++a) {
      const auto [v, n] = pairs[a];
      vocab.actions.push_back({v, n, vocab.verbs[v] + " " + vocab.nouns[n]});
    }
  }

  // Prototypes.
  std::vector<std::vector<std::vector<std::uint32_t>>> objects(num_mod);
  for (std::size_t m = 0; m < num_mod; ++m) {
    const auto& mod = config.modalities[m];
    Rng rng = root.derive({kPrototypes, m});
    Matrix proto(K, mod.dim);
    if (mod.kind == SynthModality::Kind::dense) {
      for (double& v : proto.data()) v = config.signal * rng.normal();
    } else {
      std::set<std::vector<std::uint32_t>> used;
      std::vector<std::uint32_t> ids(mod.dim);
      std::iota(ids.begin(), ids.end(), 0u);
      for (std::size_t a = 0; a < K; ++a) {
        std::vector<std::uint32_t> pick;
        do {
          rng.shuffle(std::span(ids));
          pick.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(config.objects_per_action));
          std::sort(pick.begin(), pick.end());
        } while (!used.insert(pick).second);
        for (auto o : pick) proto(a, o) = 1.0;
        objects[m].push_back(std::move(pick));
      }
    }
    data.prototypes.push_back(std::move(proto));
  }

  // Labels and corruption flags, one manifest row per sample.
  const std::size_t total = config.train_samples + config.val_samples;
  std::vector<std::size_t> labels(total);
  {
    Rng rng = root.derive({kLabels});
    for (auto& l : labels) l = static_cast<std::size_t>(rng.uniform_int(K));
  }
  data.corrupted.assign(num_mod, std::vector<bool>(total, false));
  for (std::size_t m = 0; m < num_mod; ++m) {
    Rng rng = root.derive({kCorruption, m});
    const double p = config.modality_corruption(m);
    for (std::size_t row = 0; row < total; ++row) data.corrupted[m][row] = rng.bernoulli(p);
  }

  const auto [fps_num, fps_den] = config.fps_fraction();
  const std::size_t W = config.window_steps;
  const std::size_t dur = frames_for(config.action_duration, config.alpha);
  const std::size_t gap = frames_for(config.gap, config.alpha);
  auto frame_time = [&](std::size_t frame) {
    return static_cast<double>(frame) * fps_den / fps_num;
  };

  std::size_t row = 0;
  std::size_t video_index = 0;
  for (int split = 0; split < 2; ++split) {
    const std::size_t count = split == 0 ? config.train_samples : config.val_samples;
    const std::string prefix = split == 0 ? "train" : "val";
    for (std::size_t done = 0, v = 0; done < count; ++v, ++video_index) {
      char name[32];
      std::snprintf(name, sizeof(name), "%s_%04zu", prefix.c_str(), v);
      const std::string video = name;
      (split == 0 ? data.train_videos : data.val_videos).push_back(video);
      const std::size_t n_actions = std::min(config.actions_per_video, count - done);

      // Frame layout and evidence.
      std::vector<FrameInfo> frames(gap);
      for (std::size_t a = 0; a < n_actions; ++a, ++row, ++done) {
        const std::size_t start = frames.size() + W;
        for (std::size_t n = W; n >= 1; --n) {
          const double r = std::pow(static_cast<double>(W + 1 - n) / W, config.ramp_power);
          frames.push_back({r, static_cast<std::ptrdiff_t>(row)});
        }
        for (std::size_t k = 0; k < dur; ++k) {
          const double r = config.in_action_floor +
                           (1.0 - config.in_action_floor) * static_cast<double>(k + 1) / dur;
          frames.push_back({r, static_cast<std::ptrdiff_t>(row)});
        }
        frames.resize(frames.size() + gap);
        const std::size_t label = labels[row];
        data.manifest.push_back({video, frame_time(start), frame_time(start + dur),
                                 data.vocabulary.actions[label].verb,
                                 data.vocabulary.actions[label].noun, label});
      }

      for (std::size_t m = 0; m < num_mod; ++m) {
        const auto& mod = config.modalities[m];
        const double noise = config.modality_noise(m);
        Rng rng = root.derive({kFrames, m, video_index});
        FeatureTable table;
        table.fps_numerator = fps_num;
        table.fps_denominator = fps_den;
        table.rows = Matrix(frames.size(), mod.dim);
        std::vector<DetectionRecord> dets;
        for (std::size_t f = 0; f < frames.size(); ++f) {
          table.frames.push_back(static_cast<std::uint32_t>(f));
          const FrameInfo& info = frames[f];
          const bool corrupt = info.row >= 0 && data.corrupted[m][static_cast<std::size_t>(info.row)];
          const std::size_t label = info.row >= 0 ? labels[static_cast<std::size_t>(info.row)] : 0;
          auto out = table.rows.row(f);
          if (mod.kind == SynthModality::Kind::dense) {
            if (corrupt) {
              const double sd = std::sqrt(config.signal * config.signal + noise * noise);
              for (double& v : out) v = to_float(sd * rng.normal());
            } else {
              const auto proto = data.prototypes[m].row(label);
              for (std::size_t d = 0; d < mod.dim; ++d) {
                out[d] = to_float(info.evidence * proto[d] + noise * rng.normal());
              }
            }
            continue;
          }
          DetectionRecord rec{video, static_cast<std::uint32_t>(f), {}};
          if (corrupt) {
            const double p = static_cast<double>(config.objects_per_action) / mod.dim;
            for (std::uint32_t o = 0; o < mod.dim; ++o) {
              if (rng.bernoulli(p)) rec.detections.push_back({o, to_float(rng.uniform(0.5, 1.0))});
            }
          } else if (info.evidence > 0.0) {
            for (auto o : objects[m][label]) {
              if (rng.bernoulli(info.evidence)) {
                rec.detections.push_back({o, to_float(rng.uniform(0.5, 1.0))});
              }
            }
          }
          // False positives: floor(noise) draws plus one more with the
          // fractional probability.
          std::size_t fp = static_cast<std::size_t>(noise);
          if (rng.bernoulli(noise - static_cast<double>(fp))) ++fp;
          for (std::size_t i = 0; i < fp; ++i) {
            const auto o = static_cast<std::uint32_t>(rng.uniform_int(mod.dim));
            rec.detections.push_back({o, to_float(rng.uniform(0.0, 0.5))});
          }
          const Vector boo = bag_of_objects(rec.detections, mod.dim);
          for (std::size_t d = 0; d < mod.dim; ++d) out[d] = to_float(boo[d]);
          dets.push_back(std::move(rec));
        }
        data.features.add(mod.name, video, std::move(table));
        if (mod.kind == SynthModality::Kind::objects) {
          auto& all = data.detections[mod.name];
          all.insert(all.end(), std::make_move_iterator(dets.begin()),
                     std::make_move_iterator(dets.end()));
        }
      }
    }
  }

  std::vector<std::size_t> train_labels(labels.begin(),
                                        labels.begin() + static_cast<std::ptrdiff_t>(config.train_samples));
  data.vocabulary.set_many_shot_from_labels(train_labels, config.many_shot_threshold);
  data.vocabulary.validate();
  return data;
}

void write_synth(const SynthDataset& data, const SynthConfig& config, const fs::path& dir) {
  fs::create_directories(dir);
  data.vocabulary.save(dir / "vocab.json");
  write_manifest(dir / "manifest.csv", data.manifest);
  binary::write_file(dir / "splits.json",
                     json{{"train", data.train_videos}, {"val", data.val_videos}}.dump(2) + "\n");
  data.features.save(dir);
  if (!data.detections.empty()) fs::create_directories(dir / "detections");
  for (const auto& [modality, records] : data.detections) {
    write_detections(dir / "detections" / (modality + ".jsonl"), records);
  }
  json corrupted = json::object();
  for (std::size_t m = 0; m < config.modalities.size(); ++m) {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < data.corrupted[m].size(); ++r) {
      if (data.corrupted[m][r]) rows.push_back(r);
    }
    corrupted[config.modalities[m].name] = rows;
  }
  const json meta{{"config", config.to_json()}, {"corrupted", corrupted}};
  binary::write_file(dir / "synth_meta.json", meta.dump(2) + "\n");
}

}  // namespace rulstm
