// seld/trainer/config.hpp

// Copyright 2026  The einv2-seld authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Run configuration: a YAML document whose top-level mapping holds the
// sections dataset, features, model, loss, train, eval and sweep, each a
// mapping of scalar keys (sweep lists may be sequences or comma lists).
// Every key has a default; unknown sections or keys are rejected with the
// line number. serialize() writes every field, so parse(serialize(c))
// reproduces c and serialize is a fixed point.

#pragma once

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "seld/data/dataset.hpp"
#include "seld/features/featurize.hpp"
#include "seld/losses/pit.hpp"
#include "seld/model/config.hpp"
#include "seld/trainer/optim.hpp"

namespace seld::trainer {

struct DatasetSection {
  std::string root = "data";
  std::string train_split = "train";
  std::string test_split = "test";
  int train_clips = 10;
  int test_clips = 4;
  data::SceneSpec scene;
};

struct TrainSection {
  int batch_size = 32;
  double epoch_scale = 1.0;
  double lr_high = 5e-4;
  double lr_low = 5e-5;
  AdamWConfig adamw;
  double clip_norm = 5.0;
  // Stops after this many optimizer steps when > 0 (overfit runs).
  long max_steps = 0;
  std::uint64_t seed = 0;
  int n_trials = 1;
  bool rotate = true;
  bool spec_augment = true;
  features::SpecAugmentConfig masks;
  int eval_every = 1;
  std::string out_dir = "runs/default";

  LrSchedule schedule() const {
    LrSchedule s;
    s.lr_high = lr_high;
    s.lr_low = lr_low;
    s.epoch_scale = epoch_scale;
    return s;
  }
};

struct LossSection {
  losses::PitKind kind = losses::PitKind::tpit;
  double beta = 1.0;
};

struct EvalSection {
  double threshold = 20.0;
  int segment_frames = 10;
  double sed_threshold = 0.5;
  bool oracle_sed = false;
  bool oracle_doa = false;
};

struct SweepSection {
  std::vector<model::PsMode> ps_modes{model::PsMode::none, model::PsMode::hard,
                                      model::PsMode::soft};
  std::vector<model::OutputFormat> formats{model::OutputFormat::seldnet,
                                           model::OutputFormat::trackwise};
};

struct RunConfig {
  DatasetSection dataset;
  features::FeatureConfig features;
  model::ModelConfig model;
  LossSection loss;
  TrainSection train;
  EvalSection eval;
  SweepSection sweep;

  void validate() const;
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Field {
  std::string section, key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
  bool list = false;  // comma-joined by get(); written as a YAML sequence
};

inline std::string where(const std::string& sec, const std::string& key) { return sec + "." + key; }

inline long to_long(const std::string& v, const std::string& name) {
  try {
    std::size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key " + name + ": expected an integer, got '" + v + "'");
  }
}

inline double to_double(const std::string& v, const std::string& name) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key " + name + ": expected a number, got '" + v + "'");
  }
}

inline bool to_bool(const std::string& v, const std::string& name) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key " + name + ": expected true/false, got '" + v + "'");
}

// Builders binding a key to a member reached through `ref`.
template <class Ref>
Field int_field(std::string sec, std::string key, Ref ref) {
  const std::string n = where(sec, key);
  return {sec, key, [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); },
          [ref, n](RunConfig& c, const std::string& v) {
            ref(c) = static_cast<std::remove_reference_t<decltype(ref(c))>>(to_long(v, n));
          }};
}

template <class Ref>
Field double_field(std::string sec, std::string key, Ref ref) {
  const std::string n = where(sec, key);
  return {sec, key, [ref](const RunConfig& c) { return fmt_double(ref(const_cast<RunConfig&>(c))); },
          [ref, n](RunConfig& c, const std::string& v) { ref(c) = to_double(v, n); }};
}

template <class Ref>
Field bool_field(std::string sec, std::string key, Ref ref) {
  const std::string n = where(sec, key);
  return {sec, key,
          [ref](const RunConfig& c) { return std::string(ref(const_cast<RunConfig&>(c)) ? "true" : "false"); },
          [ref, n](RunConfig& c, const std::string& v) { ref(c) = to_bool(v, n); }};
}

template <class Ref>
Field string_field(std::string sec, std::string key, Ref ref) {
  return {sec, key, [ref](const RunConfig& c) { return ref(const_cast<RunConfig&>(c)); },
          [ref](RunConfig& c, const std::string& v) { ref(c) = v; }};
}

inline const std::vector<Field>& fields() {
  static const std::vector<Field> f = [] {
    std::vector<Field> v;
    // dataset
    v.push_back(string_field("dataset", "root", [](RunConfig& c) -> auto& { return c.dataset.root; }));
    v.push_back(string_field("dataset", "train_split", [](RunConfig& c) -> auto& { return c.dataset.train_split; }));
    v.push_back(string_field("dataset", "test_split", [](RunConfig& c) -> auto& { return c.dataset.test_split; }));
    v.push_back(int_field("dataset", "train_clips", [](RunConfig& c) -> auto& { return c.dataset.train_clips; }));
    v.push_back(int_field("dataset", "test_clips", [](RunConfig& c) -> auto& { return c.dataset.test_clips; }));
    v.push_back(double_field("dataset", "clip_seconds", [](RunConfig& c) -> auto& { return c.dataset.scene.clip_seconds; }));
    v.push_back(int_field("dataset", "n_classes", [](RunConfig& c) -> auto& { return c.dataset.scene.n_classes; }));
    v.push_back(int_field("dataset", "max_polyphony", [](RunConfig& c) -> auto& { return c.dataset.scene.max_polyphony; }));
    v.push_back(double_field("dataset", "min_duration", [](RunConfig& c) -> auto& { return c.dataset.scene.min_duration; }));
    v.push_back(double_field("dataset", "max_duration", [](RunConfig& c) -> auto& { return c.dataset.scene.max_duration; }));
    v.push_back(double_field("dataset", "event_rate", [](RunConfig& c) -> auto& { return c.dataset.scene.event_rate; }));
    v.push_back(double_field("dataset", "snr_lo", [](RunConfig& c) -> auto& { return c.dataset.scene.snr_lo; }));
    v.push_back(double_field("dataset", "snr_hi", [](RunConfig& c) -> auto& { return c.dataset.scene.snr_hi; }));
    v.push_back(int_field("dataset", "azimuth_lo", [](RunConfig& c) -> auto& { return c.dataset.scene.azimuth_lo; }));
    v.push_back(int_field("dataset", "azimuth_hi", [](RunConfig& c) -> auto& { return c.dataset.scene.azimuth_hi; }));
    v.push_back(int_field("dataset", "elevation_lo", [](RunConfig& c) -> auto& { return c.dataset.scene.elevation_lo; }));
    v.push_back(int_field("dataset", "elevation_hi", [](RunConfig& c) -> auto& { return c.dataset.scene.elevation_hi; }));
    v.push_back(double_field("dataset", "azimuth_velocity", [](RunConfig& c) -> auto& { return c.dataset.scene.azimuth_velocity; }));
    v.push_back(int_field("dataset", "seed", [](RunConfig& c) -> auto& { return c.dataset.scene.seed; }));
    // features
    v.push_back(int_field("features", "fft_size", [](RunConfig& c) -> auto& { return c.features.fft_size; }));
    v.push_back(int_field("features", "hop", [](RunConfig& c) -> auto& { return c.features.hop; }));
    v.push_back(int_field("features", "n_mels", [](RunConfig& c) -> auto& { return c.features.n_mels; }));
    v.push_back(double_field("features", "f_lo", [](RunConfig& c) -> auto& { return c.features.f_lo; }));
    v.push_back(double_field("features", "f_hi", [](RunConfig& c) -> auto& { return c.features.f_hi; }));
    // model
    v.push_back({"model", "ps_mode", [](const RunConfig& c) { return model::to_string(c.model.ps_mode); },
                 [](RunConfig& c, const std::string& s) { c.model.ps_mode = model::parse_ps_mode(s); }});
    v.push_back({"model", "output_format",
                 [](const RunConfig& c) { return model::to_string(c.model.output_format); },
                 [](RunConfig& c, const std::string& s) {
                   c.model.output_format = model::parse_output_format(s);
                 }});
    v.push_back(int_field("model", "n_classes", [](RunConfig& c) -> auto& { return c.model.n_classes; }));
    v.push_back(int_field("model", "n_tracks", [](RunConfig& c) -> auto& { return c.model.n_tracks; }));
    v.push_back(int_field("model", "width_divisor", [](RunConfig& c) -> auto& { return c.model.width_divisor; }));
    v.push_back(int_field("model", "d_model", [](RunConfig& c) -> auto& { return c.model.d_model; }));
    v.push_back(int_field("model", "n_heads", [](RunConfig& c) -> auto& { return c.model.n_heads; }));
    v.push_back(int_field("model", "mhsa_layers", [](RunConfig& c) -> auto& { return c.model.mhsa_layers; }));
    v.push_back(bool_field("model", "scaled_logits", [](RunConfig& c) -> auto& { return c.model.scaled_logits; }));
    v.push_back(bool_field("model", "positional_encoding", [](RunConfig& c) -> auto& { return c.model.positional_encoding; }));
    v.push_back(bool_field("model", "mhsa_residual", [](RunConfig& c) -> auto& { return c.model.mhsa_residual; }));
    v.push_back(bool_field("model", "mhsa_layer_norm", [](RunConfig& c) -> auto& { return c.model.mhsa_layer_norm; }));
    v.push_back(double_field("model", "stitch_self", [](RunConfig& c) -> auto& { return c.model.stitch_self; }));
    v.push_back(double_field("model", "stitch_cross", [](RunConfig& c) -> auto& { return c.model.stitch_cross; }));
    v.push_back(bool_field("model", "train_stitch", [](RunConfig& c) -> auto& { return c.model.train_stitch; }));
    // loss
    v.push_back({"loss", "kind", [](const RunConfig& c) { return losses::to_string(c.loss.kind); },
                 [](RunConfig& c, const std::string& s) { c.loss.kind = losses::parse_pit_kind(s); }});
    v.push_back(double_field("loss", "beta", [](RunConfig& c) -> auto& { return c.loss.beta; }));
    // train
    v.push_back(int_field("train", "batch_size", [](RunConfig& c) -> auto& { return c.train.batch_size; }));
    v.push_back(double_field("train", "epoch_scale", [](RunConfig& c) -> auto& { return c.train.epoch_scale; }));
    v.push_back(double_field("train", "lr_high", [](RunConfig& c) -> auto& { return c.train.lr_high; }));
    v.push_back(double_field("train", "lr_low", [](RunConfig& c) -> auto& { return c.train.lr_low; }));
    v.push_back(double_field("train", "beta1", [](RunConfig& c) -> auto& { return c.train.adamw.beta1; }));
    v.push_back(double_field("train", "beta2", [](RunConfig& c) -> auto& { return c.train.adamw.beta2; }));
    v.push_back(double_field("train", "eps", [](RunConfig& c) -> auto& { return c.train.adamw.eps; }));
    v.push_back(double_field("train", "weight_decay", [](RunConfig& c) -> auto& { return c.train.adamw.weight_decay; }));
    v.push_back(double_field("train", "clip_norm", [](RunConfig& c) -> auto& { return c.train.clip_norm; }));
    v.push_back(int_field("train", "max_steps", [](RunConfig& c) -> auto& { return c.train.max_steps; }));
    v.push_back(int_field("train", "seed", [](RunConfig& c) -> auto& { return c.train.seed; }));
    v.push_back(int_field("train", "n_trials", [](RunConfig& c) -> auto& { return c.train.n_trials; }));
    v.push_back(bool_field("train", "rotate", [](RunConfig& c) -> auto& { return c.train.rotate; }));
    v.push_back(bool_field("train", "spec_augment", [](RunConfig& c) -> auto& { return c.train.spec_augment; }));
    v.push_back(int_field("train", "time_masks", [](RunConfig& c) -> auto& { return c.train.masks.n_time_masks; }));
    v.push_back(int_field("train", "freq_masks", [](RunConfig& c) -> auto& { return c.train.masks.n_freq_masks; }));
    v.push_back(int_field("train", "max_time_width", [](RunConfig& c) -> auto& { return c.train.masks.max_t; }));
    v.push_back(int_field("train", "max_freq_width", [](RunConfig& c) -> auto& { return c.train.masks.max_f; }));
    v.push_back(int_field("train", "eval_every", [](RunConfig& c) -> auto& { return c.train.eval_every; }));
    v.push_back(string_field("train", "out_dir", [](RunConfig& c) -> auto& { return c.train.out_dir; }));
    // eval
    v.push_back(double_field("eval", "threshold", [](RunConfig& c) -> auto& { return c.eval.threshold; }));
    v.push_back(int_field("eval", "segment_frames", [](RunConfig& c) -> auto& { return c.eval.segment_frames; }));
    v.push_back(double_field("eval", "sed_threshold", [](RunConfig& c) -> auto& { return c.eval.sed_threshold; }));
    v.push_back(bool_field("eval", "oracle_sed", [](RunConfig& c) -> auto& { return c.eval.oracle_sed; }));
    v.push_back(bool_field("eval", "oracle_doa", [](RunConfig& c) -> auto& { return c.eval.oracle_doa; }));
    // sweep
    v.push_back({"sweep", "ps_modes",
                 [](const RunConfig& c) {
                   std::string s;
                   for (auto m : c.sweep.ps_modes) s += (s.empty() ? "" : ",") + model::to_string(m);
                   return s;
                 },
                 [](RunConfig& c, const std::string& s) {
                   c.sweep.ps_modes.clear();
                   for (const auto& x : split_list(s)) c.sweep.ps_modes.push_back(model::parse_ps_mode(x));
                 },
                 true});
    v.push_back({"sweep", "formats",
                 [](const RunConfig& c) {
                   std::string s;
                   for (auto f : c.sweep.formats) s += (s.empty() ? "" : ",") + model::to_string(f);
                   return s;
                 },
                 [](RunConfig& c, const std::string& s) {
                   c.sweep.formats.clear();
                   for (const auto& x : split_list(s))
                     c.sweep.formats.push_back(model::parse_output_format(x));
                 },
                 true});
    return v;
  }();
  return f;
}

}  // namespace detail

inline void RunConfig::validate() const {
  model.validate();
  if (model.n_classes != dataset.scene.n_classes)
    throw ConfigError("model.n_classes (" + std::to_string(model.n_classes) +
                      ") must equal dataset.n_classes (" + std::to_string(dataset.scene.n_classes) + ")");
  if (features.n_mels % model.freq_pool() != 0)
    throw ConfigError("features.n_mels must be divisible by " + std::to_string(model.freq_pool()));
  if (train.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (train.epoch_scale <= 0) throw ConfigError("train.epoch_scale must be > 0");
  if (train.n_trials < 1) throw ConfigError("train.n_trials must be >= 1");
  if (train.eval_every < 1) throw ConfigError("train.eval_every must be >= 1");
  if (dataset.train_clips < 0 || dataset.test_clips < 0)
    throw ConfigError("dataset clip counts must be >= 0");
  if (eval.segment_frames < 1) throw ConfigError("eval.segment_frames must be >= 1");
  if (eval.oracle_sed && eval.oracle_doa)
    throw ConfigError("eval.oracle_sed and eval.oracle_doa are mutually exclusive");
  if (sweep.ps_modes.empty() || sweep.formats.empty())
    throw ConfigError("sweep lists must not be empty");
}

namespace detail {

inline const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields())
    if (f.section == section && f.key == key) return &f;
  return nullptr;
}

inline std::string scalar_text(const YAML::Node& n, const std::string& name) {
  if (n.IsNull()) return "";
  if (n.IsScalar()) return n.Scalar();
  if (n.IsSequence()) {
    std::string s;
    for (const auto& x : n) {
      if (!x.IsScalar()) throw ConfigError("config key " + name + ": nested values are not allowed");
      s += (s.empty() ? "" : ",") + x.Scalar();
    }
    return s;
  }
  throw ConfigError("config key " + name + ": expected a scalar value");
}

}  // namespace detail

/// Parses a YAML document on top of `base` (the defaults unless given).
/// `origin` names the source in diagnostics.
inline RunConfig parse_run_config(std::istream& is, const std::string& origin = "<config>",
                                  const RunConfig& base = {}) {
  RunConfig c = base;
  auto at = [&](const YAML::Mark& m) { return origin + ":" + std::to_string(m.line + 1) + ": "; };
  YAML::Node doc;
  try {
    doc = YAML::Load(is);
  } catch (const YAML::Exception& e) {
    throw ConfigError(at(e.mark) + e.msg);
  }
  if (doc.IsNull()) return c;
  if (!doc.IsMap()) throw ConfigError(at(doc.Mark()) + "expected a mapping of sections");
  for (const auto& sec : doc) {
    const std::string section = sec.first.Scalar();
    bool known = false;
    for (const auto& f : detail::fields()) known |= f.section == section;
    if (!known) throw ConfigError(at(sec.first.Mark()) + "unknown section '" + section + "'");
    if (sec.second.IsNull()) continue;
    if (!sec.second.IsMap()) throw ConfigError(at(sec.first.Mark()) + "section '" + section + "' must be a mapping");
    for (const auto& kv : sec.second) {
      const std::string key = kv.first.Scalar();
      const auto* f = detail::find_field(section, key);
      if (!f) throw ConfigError(at(kv.first.Mark()) + "unknown key '" + key + "' in section '" + section + "'");
      try {
        f->set(c, detail::scalar_text(kv.second, detail::where(section, key)));
      } catch (const ConfigError& e) {
        throw ConfigError(at(kv.second.Mark()) + e.what());
      }
    }
  }
  return c;
}

inline RunConfig parse_run_config(const std::string& text) {
  std::istringstream is(text);
  return parse_run_config(is);
}

inline RunConfig load_run_config(const std::string& path, const RunConfig& base = {}) {
  std::ifstream is(path);
  if (!is) throw MissingFileError("cannot open config " + path);
  return parse_run_config(is, path, base);
}

inline std::string serialize(const RunConfig& c) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  std::string section;
  for (const auto& f : detail::fields()) {
    if (f.section != section) {
      if (!section.empty()) out << YAML::EndMap;
      section = f.section;
      out << YAML::Key << section << YAML::Value << YAML::BeginMap;
    }
    out << YAML::Key << f.key << YAML::Value;
    if (f.list) out << YAML::Flow << detail::split_list(f.get(c));
    else out << f.get(c);
  }
  out << YAML::EndMap << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

/// Applies one "section.key=value" override, as given on the command line.
inline void apply_override(RunConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw ConfigError("override must look like section.key=value, got '" + assignment + "'");
  const std::string sec = detail::trim(assignment.substr(0, dot)),
                    key = detail::trim(assignment.substr(dot + 1, eq - dot - 1));
  for (const auto& f : detail::fields())
    if (f.section == sec && f.key == key) {
      f.set(c, detail::trim(assignment.substr(eq + 1)));
      return;
    }
  throw ConfigError("unknown config key '" + sec + "." + key + "'");
}

}  // namespace seld::trainer
