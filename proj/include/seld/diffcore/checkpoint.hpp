// seld/diffcore/checkpoint.hpp

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

// Binary checkpoint container. All integers little-endian.
//
//   bytes 0..7    magic "SELDCKPT"
//   u32           format version (currently 1)
//   u64           model config hash
//   u32           meta length L, then L bytes of "key=value\n" text
//   u32           entry count
//   per entry:
//     u32 name length, name bytes (UTF-8)
//     u8  dtype      (1 = float32, 2 = float64)
//     u32 rank, then rank x u64 dims
//     raw element data, row-major, little-endian IEEE-754

#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "seld/diffcore/parameters.hpp"

namespace seld::diff {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

enum class DType : std::uint8_t { f32 = 1, f64 = 2 };

template <class T>
constexpr DType dtype_of() {
  if constexpr (std::is_same_v<T, float>) return DType::f32;
  else return DType::f64;
}

struct CheckpointEntry {
  DType dtype = DType::f64;
  Shape shape;
  std::vector<std::uint8_t> bytes;
};

class Checkpoint {
 public:
  static constexpr std::uint32_t kVersion = 1;

  std::uint64_t config_hash = 0;
  std::map<std::string, std::string> meta;
  std::map<std::string, CheckpointEntry> entries;

  template <class T>
  void put(const std::string& name, const Shape& shape, std::span<const T> values) {
    CheckpointEntry e;
    e.dtype = dtype_of<T>();
    e.shape = shape;
    e.bytes.resize(values.size() * sizeof(T));
    std::memcpy(e.bytes.data(), values.data(), e.bytes.size());
    entries[name] = std::move(e);
  }

  bool has(const std::string& name) const { return entries.count(name) > 0; }

  /// Values converted to T regardless of the stored dtype.
  template <class T>
  std::vector<T> get(const std::string& name) const {
    auto it = entries.find(name);
    if (it == entries.end()) throw FormatError("checkpoint has no entry '" + name + "'");
    const auto& e = it->second;
    const std::size_t n = numel(e.shape);
    std::vector<T> out(n);
    if (e.dtype == DType::f32) {
      std::vector<float> tmp(n);
      std::memcpy(tmp.data(), e.bytes.data(), n * sizeof(float));
      for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<T>(tmp[i]);
    } else {
      std::vector<double> tmp(n);
      std::memcpy(tmp.data(), e.bytes.data(), n * sizeof(double));
      for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<T>(tmp[i]);
    }
    return out;
  }

  const Shape& shape_of(const std::string& name) const {
    auto it = entries.find(name);
    if (it == entries.end()) throw FormatError("checkpoint has no entry '" + name + "'");
    return it->second.shape;
  }

  void save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw MissingFileError("cannot write checkpoint " + path);
    os.write("SELDCKPT", 8);
    write_pod(os, kVersion);
    write_pod(os, config_hash);
    std::string m;
    for (const auto& [k, v] : meta) m += k + "=" + v + "\n";
    write_pod(os, static_cast<std::uint32_t>(m.size()));
    os.write(m.data(), static_cast<std::streamsize>(m.size()));
    write_pod(os, static_cast<std::uint32_t>(entries.size()));
    for (const auto& [name, e] : entries) {
      write_pod(os, static_cast<std::uint32_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      write_pod(os, static_cast<std::uint8_t>(e.dtype));
      write_pod(os, static_cast<std::uint32_t>(e.shape.size()));
      for (std::size_t d : e.shape) write_pod(os, static_cast<std::uint64_t>(d));
      os.write(reinterpret_cast<const char*>(e.bytes.data()),
               static_cast<std::streamsize>(e.bytes.size()));
    }
    if (!os) throw FormatError("short write on checkpoint " + path);
  }

  static Checkpoint load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingFileError("cannot open checkpoint " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, "SELDCKPT", 8) != 0)
      throw FormatError(path + ": not a checkpoint file");
    Checkpoint c;
    const auto version = read_pod<std::uint32_t>(is);
    if (version != kVersion)
      throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
    c.config_hash = read_pod<std::uint64_t>(is);
    std::string m(read_pod<std::uint32_t>(is), '\0');
    is.read(m.data(), static_cast<std::streamsize>(m.size()));
    std::size_t pos = 0;
    while (pos < m.size()) {
      const std::size_t nl = m.find('\n', pos);
      const std::string line = m.substr(pos, nl - pos);
      const std::size_t eq = line.find('=');
      if (eq != std::string::npos) c.meta[line.substr(0, eq)] = line.substr(eq + 1);
      pos = nl == std::string::npos ? m.size() : nl + 1;
    }
    const auto count = read_pod<std::uint32_t>(is);
    for (std::uint32_t i = 0; i < count; ++i) {
      std::string name(read_pod<std::uint32_t>(is), '\0');
      is.read(name.data(), static_cast<std::streamsize>(name.size()));
      CheckpointEntry e;
      e.dtype = static_cast<DType>(read_pod<std::uint8_t>(is));
      if (e.dtype != DType::f32 && e.dtype != DType::f64)
        throw FormatError(path + ": bad dtype for " + name);
      const auto rank = read_pod<std::uint32_t>(is);
      for (std::uint32_t r = 0; r < rank; ++r)
        e.shape.push_back(static_cast<std::size_t>(read_pod<std::uint64_t>(is)));
      e.bytes.resize(numel(e.shape) * (e.dtype == DType::f32 ? 4 : 8));
      is.read(reinterpret_cast<char*>(e.bytes.data()), static_cast<std::streamsize>(e.bytes.size()));
      if (!is) throw FormatError(path + ": truncated entry " + name);
      c.entries.emplace(std::move(name), std::move(e));
    }
    return c;
  }

 private:
  template <class P>
  static void write_pod(std::ostream& os, P v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(P));
  }
  template <class P>
  static P read_pod(std::istream& is) {
    P v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(P));
    if (!is) throw FormatError("truncated checkpoint");
    return v;
  }
};

/// Stores every parameter and batch-norm running statistic of `store`.
template <class T>
void save_parameters(Checkpoint& ckpt, const ParameterStore<T>& store) {
  for (const auto& [name, p] : store.params())
    ckpt.put<T>("param." + name, p.tensor.shape(), p.tensor.data());
  for (const auto& [name, s] : store.bn_states()) {
    const Shape sh{s.running_mean.size()};
    ckpt.put<T>("bn." + name + ".running_mean", sh, std::span<const T>(s.running_mean));
    ckpt.put<T>("bn." + name + ".running_var", sh, std::span<const T>(s.running_var));
  }
}

/// Overwrites `store` in place; every name must be present with a matching shape.
template <class T>
void load_parameters(const Checkpoint& ckpt, ParameterStore<T>& store) {
  for (auto& [name, p] : store.params()) {
    const std::string key = "param." + name;
    if (ckpt.shape_of(key) != p.tensor.shape())
      throw DimensionError("checkpoint shape " + to_string(ckpt.shape_of(key)) + " for " + name +
                           " does not match model shape " + to_string(p.tensor.shape()));
    const auto v = ckpt.get<T>(key);
    std::copy(v.begin(), v.end(), p.tensor.mutable_data().begin());
  }
  for (auto& [name, s] : store.bn_states()) {
    s.running_mean = ckpt.get<T>("bn." + name + ".running_mean");
    s.running_var = ckpt.get<T>("bn." + name + ".running_var");
  }
}

}  // namespace seld::diff
