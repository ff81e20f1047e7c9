// Copyright 2026 The IsoNN Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "isonn/classifier.hpp"
#include "isonn/error.hpp"

namespace isonn {

namespace {

constexpr char kMagic[8] = {'I', 'S', 'O', 'N', 'N', 'C', 'K', 'P'};

template <class T>
void write_le(std::ostream& os, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T read_le(std::istream& is, const std::string& path) {
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    fail(ErrorKind::kParse, path + ": truncated checkpoint");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

struct TensorRef {
  std::string name;
  std::size_t rows, cols;
};

MatchMode parse_mode(const std::string& s) {
  if (s == "brute") return MatchMode::kBrute;
  if (s == "fast") return MatchMode::kFast;
  fail(ErrorKind::kParse, "unknown match mode '" + s + "' in checkpoint");
}

SoftmaxAxis parse_axis(const std::string& s) {
  if (s == "per-kernel") return SoftmaxAxis::kPerKernel;
  if (s == "across-kernels") return SoftmaxAxis::kAcrossKernels;
  fail(ErrorKind::kParse, "unknown softmax axis '" + s + "' in checkpoint");
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& model) {
  model.validate();
  nlohmann::json header;
  header["format"] = "isonn-checkpoint";
  header["version"] = kCheckpointVersion;
  header["input_size"] = model.input_size;
  header["d_in"] = model.mlp.d_in();
  header["hidden1"] = model.mlp.hidden1();
  header["hidden2"] = model.mlp.hidden2();
  std::vector<std::span<const double>> data;
  nlohmann::json tensors = nlohmann::json::array();
  auto add = [&](const std::string& name, std::size_t rows, std::size_t cols,
                 std::span<const double> values) {
    tensors.push_back({{"name", name}, {"rows", rows}, {"cols", cols}});
    data.push_back(values);
  };
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& cfg = model.layers[l].config;
    layers.push_back({{"k", cfg.size_k},
                      {"c", cfg.channels_c},
                      {"mode", to_string(cfg.mode)},
                      {"softmax", to_string(cfg.softmax_axis)},
                      {"max_brute_k", cfg.max_brute_k}});
    for (std::size_t i = 0; i < model.layers[l].kernels.size(); ++i) {
      const auto& v = model.layers[l].kernels[i].values();
      add("layer" + std::to_string(l) + ".kernel" + std::to_string(i), v.rows(), v.cols(), v.data());
    }
  }
  header["layers"] = layers;
  const auto& m = model.mlp;
  add("w1", m.w1.rows(), m.w1.cols(), m.w1.data());
  add("b1", m.b1.size(), 1, m.b1);
  add("w2", m.w2.rows(), m.w2.cols(), m.w2.data());
  add("b2", m.b2.size(), 1, m.b2);
  add("w3", m.w3.rows(), m.w3.cols(), m.w3.data());
  add("b3", m.b3.size(), 1, m.b3);
  header["tensors"] = tensors;

  const std::string text = header.dump();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorKind::kIo, "cannot write checkpoint " + path);
  os.write(kMagic, sizeof(kMagic));
  write_le<std::uint32_t>(os, kCheckpointVersion);
  write_le<std::uint64_t>(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : data) {
    for (double x : t) write_le<double>(os, x);
  }
  if (!os) fail(ErrorKind::kIo, "write failed for checkpoint " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::kIo, "cannot open checkpoint " + path);
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    fail(ErrorKind::kParse, path + ": not an IsoNN checkpoint");
  }
  const auto version = read_le<std::uint32_t>(is, path);
  if (version != kCheckpointVersion) {
    fail(ErrorKind::kParse, path + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto len = read_le<std::uint64_t>(is, path);
  if (len > (std::uint64_t{1} << 30)) fail(ErrorKind::kParse, path + ": implausible header length");
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len))) {
    fail(ErrorKind::kParse, path + ": truncated checkpoint header");
  }

  ModelParams model;
  try {
    const auto header = nlohmann::json::parse(text);
    model.input_size = header.at("input_size").get<std::size_t>();
    for (const auto& l : header.at("layers")) {
      IsoLayer layer;
      layer.config.size_k = l.at("k").get<std::size_t>();
      layer.config.channels_c = l.at("c").get<std::size_t>();
      layer.config.mode = parse_mode(l.at("mode").get<std::string>());
      layer.config.softmax_axis = parse_axis(l.at("softmax").get<std::string>());
      layer.config.max_brute_k = l.at("max_brute_k").get<std::size_t>();
      model.layers.push_back(std::move(layer));
    }
    model.mlp = MLPParams::zeros(header.at("d_in").get<std::size_t>(),
                                 header.at("hidden1").get<std::size_t>(),
                                 header.at("hidden2").get<std::size_t>());
    std::vector<TensorRef> refs;
    for (const auto& t : header.at("tensors")) {
      refs.push_back({t.at("name").get<std::string>(), t.at("rows").get<std::size_t>(),
                      t.at("cols").get<std::size_t>()});
    }
    auto read_values = [&](const TensorRef& ref) {
      std::vector<double> v(ref.rows * ref.cols);
      for (double& x : v) x = read_le<double>(is, path);
      return v;
    };
    std::size_t next = 0;
    auto take = [&](const std::string& name) -> const TensorRef& {
      if (next >= refs.size() || refs[next].name != name) {
        fail(ErrorKind::kParse, path + ": expected tensor '" + name + "'");
      }
      return refs[next++];
    };
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      for (std::size_t i = 0; i < model.layers[l].config.channels_c; ++i) {
        const auto& ref = take("layer" + std::to_string(l) + ".kernel" + std::to_string(i));
        model.layers[l].kernels.emplace_back(DenseMatrix(ref.rows, ref.cols, read_values(ref)));
      }
    }
    auto matrix = [&](const std::string& name) {
      const auto& ref = take(name);
      return DenseMatrix(ref.rows, ref.cols, read_values(ref));
    };
    model.mlp.w1 = matrix("w1");
    model.mlp.b1 = read_values(take("b1"));
    model.mlp.w2 = matrix("w2");
    model.mlp.b2 = read_values(take("b2"));
    model.mlp.w3 = matrix("w3");
    model.mlp.b3 = read_values(take("b3"));
    if (next != refs.size()) fail(ErrorKind::kParse, path + ": unexpected extra tensors");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, path + ": bad checkpoint header: " + e.what());
  }
  model.validate();
  return model;
}

}  // namespace isonn
