// seld/data/wav.hpp

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

// Minimal RIFF/WAVE reader and writer for 4-channel FOA audio. Writes 16-bit
// PCM; reads 16-bit PCM and 32-bit float (plain or WAVE_FORMAT_EXTENSIBLE).

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "seld/data/foa.hpp"

namespace seld::data {

inline constexpr float kPcm16Scale = 32767.0f;

namespace detail {

template <class P>
void put_le(std::ostream& os, P v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(P));
}

template <class P>
P get_le(const std::vector<char>& buf, std::size_t off) {
  P v{};
  std::memcpy(&v, buf.data() + off, sizeof(P));
  return v;
}

}  // namespace detail

inline std::int16_t to_pcm16(float x) {
  const float c = std::clamp(x, -1.0f, 1.0f);
  return static_cast<std::int16_t>(std::lround(c * kPcm16Scale));
}

inline void write_wav(const std::string& path, const std::array<std::vector<float>, 4>& audio,
                      int sample_rate = kSampleRate) {
  const std::size_t n = audio[0].size();
  for (const auto& ch : audio)
    if (ch.size() != n) throw DimensionError("write_wav: channels have different lengths");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw MissingFileError("cannot write " + path);
  const std::uint16_t channels = 4, bits = 16, block = channels * bits / 8;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(n * block);
  os.write("RIFF", 4);
  detail::put_le<std::uint32_t>(os, 36 + data_bytes);
  os.write("WAVEfmt ", 8);
  detail::put_le<std::uint32_t>(os, 16);
  detail::put_le<std::uint16_t>(os, 1);
  detail::put_le<std::uint16_t>(os, channels);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(sample_rate));
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(sample_rate) * block);
  detail::put_le<std::uint16_t>(os, block);
  detail::put_le<std::uint16_t>(os, bits);
  os.write("data", 4);
  detail::put_le<std::uint32_t>(os, data_bytes);
  std::vector<std::int16_t> frame(n * channels);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < channels; ++c) frame[i * channels + c] = to_pcm16(audio[c][i]);
  os.write(reinterpret_cast<const char*>(frame.data()),
           static_cast<std::streamsize>(frame.size() * sizeof(std::int16_t)));
  if (!os) throw FormatError("short write on " + path);
}

struct WavAudio {
  int sample_rate = 0;
  std::array<std::vector<float>, 4> audio;
};

inline WavAudio read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingFileError("cannot open " + path);
  std::vector<char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw FormatError(path + ": not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t data_off = 0, data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const std::string id(buf.data() + pos, 4);
    const auto len = detail::get_le<std::uint32_t>(buf, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (len < 16 || body + len > buf.size()) throw FormatError(path + ": bad fmt chunk");
      format = detail::get_le<std::uint16_t>(buf, body);
      channels = detail::get_le<std::uint16_t>(buf, body + 2);
      rate = detail::get_le<std::uint32_t>(buf, body + 4);
      bits = detail::get_le<std::uint16_t>(buf, body + 14);
      if (format == 0xFFFE && len >= 26) format = detail::get_le<std::uint16_t>(buf, body + 24);
    } else if (id == "data") {
      data_off = body;
      data_len = std::min<std::size_t>(len, buf.size() - body);
    }
    pos = body + len + (len & 1u);
  }
  if (format == 0 || data_off == 0) throw FormatError(path + ": missing fmt or data chunk");
  if (channels != kFoaChannels)
    throw FormatError(path + ": expected 4 FOA channels, found " + std::to_string(channels));
  const bool pcm16 = format == 1 && bits == 16;
  const bool f32 = format == 3 && bits == 32;
  if (!pcm16 && !f32) throw FormatError(path + ": unsupported sample format");

  WavAudio w;
  w.sample_rate = static_cast<int>(rate);
  const std::size_t bytes = bits / 8;
  const std::size_t n = data_len / (bytes * channels);
  for (auto& ch : w.audio) ch.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < 4; ++c) {
      const std::size_t off = data_off + (i * channels + c) * bytes;
      w.audio[c][i] = pcm16 ? detail::get_le<std::int16_t>(buf, off) / kPcm16Scale
                            : detail::get_le<float>(buf, off);
    }
  return w;
}

}  // namespace seld::data
