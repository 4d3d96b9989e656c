// seld/model/config.hpp

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

#pragma once

#include <array>
#include <sstream>
#include <string>
#include <utility>

#include "seld/common.hpp"

namespace seld::model {

enum class PsMode { none, hard, soft };
enum class OutputFormat { trackwise, seldnet };

inline std::string to_string(PsMode m) {
  switch (m) {
    case PsMode::none: return "none";
    case PsMode::hard: return "hard";
    case PsMode::soft: return "soft";
  }
  return "?";
}

inline std::string to_string(OutputFormat f) {
  return f == OutputFormat::trackwise ? "trackwise" : "seldnet";
}

inline PsMode parse_ps_mode(const std::string& s) {
  if (s == "none") return PsMode::none;
  if (s == "hard") return PsMode::hard;
  if (s == "soft") return PsMode::soft;
  throw ConfigError("ps_mode must be none, hard or soft (got '" + s + "')");
}

inline OutputFormat parse_output_format(const std::string& s) {
  if (s == "trackwise") return OutputFormat::trackwise;
  if (s == "seldnet") return OutputFormat::seldnet;
  throw ConfigError("output_format must be trackwise or seldnet (got '" + s + "')");
}

struct ModelConfig {
  int n_classes = 14;
  int n_tracks = 2;
  PsMode ps_mode = PsMode::soft;
  OutputFormat output_format = OutputFormat::trackwise;
  std::array<int, 4> widths{64, 128, 256, 512};
  int width_divisor = 1;
  int d_model = 512;
  int n_heads = 8;
  int mhsa_layers = 2;
  std::array<std::pair<int, int>, 4> pools{{{2, 2}, {2, 2}, {1, 2}, {1, 2}}};
  int sed_in_channels = 4;
  int doa_in_channels = 7;

  bool scaled_logits = false;
  bool positional_encoding = true;
  bool mhsa_residual = true;
  bool mhsa_layer_norm = true;
  // Cross-stitch alpha starts as [[self, cross], [cross, self]] per channel.
  double stitch_self = 0.9;
  double stitch_cross = 0.1;
  bool train_stitch = true;

  int width(int block) const { return widths[block] / width_divisor; }
  int time_pool() const {
    int p = 1;
    for (const auto& [t, f] : pools) p *= t;
    return p;
  }
  int freq_pool() const {
    int p = 1;
    for (const auto& [t, f] : pools) p *= f;
    return p;
  }

  void validate() const {
    if (n_classes < 1) throw ConfigError("n_classes must be positive");
    if (n_tracks < 1) throw ConfigError("n_tracks must be positive");
    if (width_divisor < 1) throw ConfigError("width_divisor must be positive");
    for (int w : widths)
      if (w % width_divisor != 0 || w / width_divisor < 1)
        throw ConfigError("channel width " + std::to_string(w) + " not divisible by width_divisor " +
                          std::to_string(width_divisor));
    if (n_heads < 1 || d_model % n_heads != 0)
      throw ConfigError("d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                        std::to_string(n_heads));
    if (d_model != width(3))
      throw ConfigError("d_model must equal the last conv width (" + std::to_string(width(3)) +
                        "), got " + std::to_string(d_model));
    if (mhsa_layers < 0) throw ConfigError("mhsa_layers must be >= 0");
  }

  /// Stable text form of every field that changes parameter shapes or the
  /// forward computation.
  std::string canonical() const {
    std::ostringstream os;
    os << "K=" << n_classes << ";M=" << n_tracks << ";ps=" << to_string(ps_mode)
       << ";fmt=" << to_string(output_format) << ";widths=";
    for (int w : widths) os << w << ",";
    os << ";div=" << width_divisor << ";D=" << d_model << ";H=" << n_heads
       << ";L=" << mhsa_layers << ";pools=";
    for (const auto& [t, f] : pools) os << t << "x" << f << ",";
    os << ";in=" << sed_in_channels << "/" << doa_in_channels << ";scaled=" << scaled_logits
       << ";pe=" << positional_encoding << ";res=" << mhsa_residual << ";ln=" << mhsa_layer_norm;
    return os.str();
  }
  std::uint64_t hash() const { return fnv1a(canonical()); }
};

/// Tiny configuration used by the tests: widths / 8, D = 64, two heads.
inline ModelConfig tiny_config(PsMode ps = PsMode::soft,
                               OutputFormat fmt = OutputFormat::trackwise) {
  ModelConfig c;
  c.width_divisor = 8;
  c.d_model = 64;
  c.n_heads = 2;
  c.ps_mode = ps;
  c.output_format = fmt;
  return c;
}

}  // namespace seld::model
