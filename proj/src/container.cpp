// Copyright 2026 The usdf Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "usdf/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace usdf {
namespace {

constexpr std::string_view kMagic = "USDF";

std::uint64_t to_little_endian(std::uint64_t bits) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t out = 0;
    for (int i = 0; i < 8; ++i) out |= ((bits >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return out;
  }
  return bits;
}

void write_doubles(std::ostream& out, std::span<const double> values) {
  std::vector<char> bytes(values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(values[i]));
    std::memcpy(bytes.data() + 8 * i, &bits, 8);
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void read_doubles(std::istream& in, std::span<double> values) {
  std::vector<char> bytes(values.size() * 8);
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
    throw DataError("container: truncated payload");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, bytes.data() + 8 * i, 8);
    values[i] = std::bit_cast<double>(to_little_endian(bits));
  }
}

std::string join(const std::vector<std::size_t>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
  return os.str();
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::istringstream is(text);
  std::vector<std::size_t> out;
  std::size_t v = 0;
  while (is >> v) out.push_back(v);
  return out;
}

}  // namespace

void Container::set(std::string key, std::string value) {
  if (key.find_first_of(" \n") != std::string::npos || value.find('\n') != std::string::npos) {
    throw UsageError("container: metadata key/value may not contain newlines or key spaces");
  }
  for (auto& [k, v] : metadata) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  metadata.emplace_back(std::move(key), std::move(value));
}

bool Container::has(std::string_view key) const {
  for (const auto& kv : metadata)
    if (kv.first == key) return true;
  return false;
}

const std::string& Container::get(std::string_view key) const {
  for (const auto& kv : metadata)
    if (kv.first == key) return kv.second;
  throw DataError("container: missing metadata key '" + std::string(key) + "'");
}

void Container::add_array(std::string name, DenseArray array) {
  arrays.emplace_back(std::move(name), std::move(array));
}

const DenseArray& Container::array(std::string_view name) const {
  for (const auto& kv : arrays)
    if (kv.first == name) return kv.second;
  throw DataError("container: missing array '" + std::string(name) + "'");
}

void write_container(std::ostream& out, const Container& c) {
  out << kMagic << ' ' << c.kind << ' ' << c.version << '\n';
  for (const auto& [k, v] : c.metadata) out << "meta " << k << ' ' << v << '\n';
  for (const auto& [name, a] : c.arrays) {
    out << "array " << name << ' ' << a.rank();
    for (auto d : a.shape) out << ' ' << d;
    out << '\n';
  }
  out << "end\n";
  for (const auto& kv : c.arrays) write_doubles(out, kv.second.data);
  if (!out) throw DataError("container: write failed");
}

Container read_container(std::istream& in) {
  Container c;
  std::string line;
  if (!std::getline(in, line)) throw DataError("container: empty input");
  {
    std::istringstream head(line);
    std::string magic;
    head >> magic >> c.kind >> c.version;
    if (magic != kMagic || !head) throw DataError("container: bad magic line '" + line + "'");
    if (c.version != kContainerVersion) {
      throw DataError("container: unsupported format version " + std::to_string(c.version));
    }
  }
  std::vector<std::pair<std::string, std::vector<std::size_t>>> declared;
  while (true) {
    if (!std::getline(in, line)) throw DataError("container: header not terminated");
    if (line == "end") break;
    std::istringstream is(line);
    std::string tag;
    is >> tag;
    if (tag == "meta") {
      std::string key;
      is >> key;
      std::string value;
      std::getline(is, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      c.metadata.emplace_back(key, value);
    } else if (tag == "array") {
      std::string name;
      std::size_t rank = 0;
      is >> name >> rank;
      std::vector<std::size_t> dims(rank);
      for (auto& d : dims) is >> d;
      if (!is) throw DataError("container: malformed array line '" + line + "'");
      declared.emplace_back(name, dims);
    } else {
      throw DataError("container: unexpected header line '" + line + "'");
    }
  }
  for (auto& [name, dims] : declared) {
    DenseArray a(dims);
    read_doubles(in, a.data);
    c.arrays.emplace_back(name, std::move(a));
  }
  return c;
}

void save_container(const std::filesystem::path& path, const Container& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  write_container(out, c);
}

Container load_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  try {
    return read_container(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void put_mlp(Container& c, const MlpModel& model, const std::string& prefix) {
  validate(model);
  c.set(prefix + "format_version", std::to_string(kContainerVersion));
  c.set(prefix + "layer_dims", join(model.layer_dims));
  std::string acts;
  for (std::size_t l = 0; l < model.activations.size(); ++l) {
    acts += (l ? " " : "") + to_string(model.activations[l]);
  }
  c.set(prefix + "activations", acts);
  c.set(prefix + "seed", std::to_string(model.seed));
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    c.add_array(prefix + "w" + std::to_string(l), model.weights[l]);
    c.add_array(prefix + "b" + std::to_string(l), model.biases[l]);
  }
}

MlpModel get_mlp(const Container& c, const std::string& prefix) {
  MlpModel model;
  model.layer_dims = parse_sizes(c.get(prefix + "layer_dims"));
  {
    std::istringstream is(c.get(prefix + "activations"));
    std::string name;
    while (is >> name) model.activations.push_back(activation_from_string(name));
  }
  model.seed = std::stoull(c.get(prefix + "seed"));
  if (model.layer_dims.size() < 2) throw DataError("container: mlp needs >= 2 layer dims");
  for (std::size_t l = 0; l + 1 < model.layer_dims.size(); ++l) {
    model.weights.push_back(c.array(prefix + "w" + std::to_string(l)));
    model.biases.push_back(c.array(prefix + "b" + std::to_string(l)));
  }
  try {
    validate(model);
  } catch (const DimensionError& e) {
    throw DataError(std::string("container: ") + e.what());
  }
  return model;
}

void save_mlp(const std::filesystem::path& path, const MlpModel& model) {
  Container c;
  c.kind = "mlp";
  put_mlp(c, model);
  save_container(path, c);
}

MlpModel load_mlp(const std::filesystem::path& path) {
  Container c = load_container(path);
  if (c.kind != "mlp") throw DataError(path.string() + ": expected an mlp container");
  return get_mlp(c);
}

}  // namespace usdf
