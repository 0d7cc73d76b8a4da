// Copyright 2026 The prong Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "prong/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "prong/errors.hpp"

namespace prong {

namespace {

constexpr char kMagic[8] = {'P', 'R', 'O', 'N', 'G', 'C', 'K', '1'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t offset) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  }
  return v;
}

void put_array(std::string& out, const double* data, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) put_u64(out, std::bit_cast<std::uint64_t>(data[i]));
}

struct ArrayShape {
  std::string name;
  Eigen::Index rows;
  Eigen::Index cols;
};

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  ckpt.spec.validate();
  check_shapes(ckpt.spec, ckpt.layers);
  const bool whitened = ckpt.kind == Parametrization::whitened;
  if (whitened) check_shapes(ckpt.spec, ckpt.whitening);

  nlohmann::json header;
  header["format"] = "prong-checkpoint";
  header["version"] = 1;
  header["parametrization"] = std::string(to_string(ckpt.kind));
  header["seed"] = ckpt.seed;
  header["step"] = ckpt.step;
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : ckpt.spec.layers) {
    layers.push_back({{"in_dim", l.in_dim},
                      {"out_dim", l.out_dim},
                      {"activation", std::string(to_string(l.activation))}});
  }
  header["spec"] = {{"layers", layers}};
  nlohmann::json arrays = nlohmann::json::array();
  for (std::size_t i = 0; i < ckpt.layers.size(); ++i) {
    const auto& p = ckpt.layers[i];
    arrays.push_back({{"name", "layers." + std::to_string(i) + ".weight"},
                      {"rows", p.weight.rows()},
                      {"cols", p.weight.cols()}});
    arrays.push_back({{"name", "layers." + std::to_string(i) + ".bias"},
                      {"rows", p.bias.size()},
                      {"cols", 1}});
  }
  if (whitened) {
    for (std::size_t i = 0; i < ckpt.whitening.layers.size(); ++i) {
      const auto& w = ckpt.whitening.layers[i];
      arrays.push_back({{"name", "whitening." + std::to_string(i) + ".u"},
                        {"rows", w.u.rows()},
                        {"cols", w.u.cols()}});
      arrays.push_back({{"name", "whitening." + std::to_string(i) + ".c"},
                        {"rows", w.c.size()},
                        {"cols", 1}});
    }
  }
  header["arrays"] = arrays;

  const std::string text = header.dump();
  std::string out(kMagic, sizeof kMagic);
  put_u64(out, text.size());
  out += text;
  for (const auto& p : ckpt.layers) {
    put_array(out, p.weight.data(), static_cast<std::size_t>(p.weight.size()));
    put_array(out, p.bias.data(), static_cast<std::size_t>(p.bias.size()));
  }
  if (whitened) {
    for (const auto& w : ckpt.whitening.layers) {
      put_array(out, w.u.data(), static_cast<std::size_t>(w.u.size()));
      put_array(out, w.c.data(), static_cast<std::size_t>(w.c.size()));
    }
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 16) throw FormatError("checkpoint: file too short", bytes.size());
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError("checkpoint: bad magic", 0);
  }
  const std::uint64_t header_len = get_u64(bytes, 8);
  if (header_len > bytes.size() - 16) throw FormatError("checkpoint: truncated header", 16);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 16,
                                   bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: malformed header: ") + e.what(), 16);
  }

  Checkpoint ckpt;
  std::vector<ArrayShape> shapes;
  try {
    if (header.at("format") != "prong-checkpoint" || header.at("version") != 1) {
      throw FormatError("checkpoint: unsupported format or version", 16);
    }
    const std::string kind = header.at("parametrization");
    if (kind == "canonical") {
      ckpt.kind = Parametrization::canonical;
    } else if (kind == "whitened") {
      ckpt.kind = Parametrization::whitened;
    } else {
      throw FormatError("checkpoint: unknown parametrization '" + kind + "'", 16);
    }
    ckpt.seed = header.at("seed").get<std::uint64_t>();
    ckpt.step = header.at("step").get<std::uint64_t>();
    for (const auto& l : header.at("spec").at("layers")) {
      ckpt.spec.layers.push_back({l.at("in_dim").get<std::size_t>(),
                                  l.at("out_dim").get<std::size_t>(),
                                  activation_from_string(l.at("activation").get<std::string>())});
    }
    for (const auto& a : header.at("arrays")) {
      shapes.push_back({a.at("name").get<std::string>(), a.at("rows").get<Eigen::Index>(),
                        a.at("cols").get<Eigen::Index>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: incomplete header: ") + e.what(), 16);
  } catch (const ValidationError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what(), 16);
  }
  ckpt.spec.validate();

  const std::size_t expected_arrays =
      2 * ckpt.spec.depth() * (ckpt.kind == Parametrization::whitened ? 2 : 1);
  if (shapes.size() != expected_arrays) {
    throw FormatError("checkpoint: expected " + std::to_string(expected_arrays) +
                          " arrays, header lists " + std::to_string(shapes.size()),
                      16);
  }

  std::size_t offset = 16 + header_len;
  std::size_t next = 0;
  auto read = [&](double* dst, Eigen::Index rows, Eigen::Index cols) {
    const ArrayShape& s = shapes[next++];
    if (s.rows != rows || s.cols != cols) {
      throw FormatError("checkpoint: array '" + s.name + "' has shape " + std::to_string(s.rows) +
                            "x" + std::to_string(s.cols) + ", spec requires " +
                            std::to_string(rows) + "x" + std::to_string(cols),
                        offset);
    }
    const auto count = static_cast<std::size_t>(rows * cols);
    if (bytes.size() < offset + 8 * count) {
      throw FormatError("checkpoint: truncated array '" + s.name + "'", bytes.size());
    }
    for (std::size_t i = 0; i < count; ++i) {
      dst[i] = std::bit_cast<double>(get_u64(bytes, offset + 8 * i));
    }
    offset += 8 * count;
  };

  for (const auto& l : ckpt.spec.layers) {
    const auto out = static_cast<Eigen::Index>(l.out_dim);
    const auto in = static_cast<Eigen::Index>(l.in_dim);
    AffineParams p{Matrix(out, in), Vector(out)};
    read(p.weight.data(), out, in);
    read(p.bias.data(), out, 1);
    ckpt.layers.push_back(std::move(p));
  }
  if (ckpt.kind == Parametrization::whitened) {
    for (const auto& l : ckpt.spec.layers) {
      const auto n = static_cast<Eigen::Index>(l.in_dim);
      Whitening w{Matrix(n, n), Vector(n)};
      read(w.u.data(), n, n);
      read(w.c.data(), n, 1);
      ckpt.whitening.layers.push_back(std::move(w));
    }
  }
  if (offset != bytes.size()) {
    throw FormatError("checkpoint: trailing bytes after the last array", offset);
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open checkpoint for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return decode_checkpoint(buffer.str());
}

}  // namespace prong
