#pragma once

// Binary checkpoints.
//
//   bytes 0..7    "PSNNCKPT"
//   u32 LE        format version
//   u64 LE        length of the JSON header
//   JSON header   {"config": {...}, "layer_dims": [...], "epochs_completed": n}
//   f64 LE ...    per layer: weights (column-major), then bias
//
// Doubles are stored by bit pattern, so save/load round-trips exactly. All
// training randomness is derived from (seed, epoch, ...), so seed plus
// epochs_completed is the full RNG position.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "psnn/config_io.hpp"
#include "psnn/errors.hpp"
#include "psnn/network.hpp"

namespace psnn {

inline constexpr char kCheckpointMagic[8] = {'P', 'S', 'N', 'N', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Network network;
  int epochs_completed = 0;
};

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put_raw(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get_raw(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  const auto offset = static_cast<long long>(in.tellg());
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw FormatError(path.string() + ": truncated checkpoint at offset " + std::to_string(offset));
  return v;
}

inline void put_doubles(std::ofstream& out, const double* p, Eigen::Index n) {
  out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

inline void get_doubles(std::ifstream& in, double* p, Eigen::Index n, const std::filesystem::path& path) {
  const auto offset = static_cast<long long>(in.tellg());
  if (!in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double))))
    throw FormatError(path.string() + ": truncated parameter block at offset " + std::to_string(offset));
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, const Network& net, int epochs_completed) {
  Json header;
  header["config"] = to_json(net.config);
  header["layer_dims"] = net.config.layer_dims;
  header["epochs_completed"] = epochs_completed;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put_raw<std::uint32_t>(out, kCheckpointVersion);
  detail::put_raw<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& layer : net.layers) {
    detail::put_doubles(out, layer.weights.data(), layer.weights.size());
    detail::put_doubles(out, layer.bias.data(), layer.bias.size());
  }
  if (!out) throw Error("write failed for checkpoint " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw FormatError(path.string() + ": not a checkpoint (bad magic at offset 0)");
  const auto version = detail::get_raw<std::uint32_t>(in, path);
  if (version != kCheckpointVersion)
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  const auto len = detail::get_raw<std::uint64_t>(in, path);
  if (len > (1u << 24)) throw FormatError(path.string() + ": implausible header length at offset 12");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len)))
    throw FormatError(path.string() + ": truncated header at offset 20");

  Json header;
  try {
    header = Json::parse(text);
  } catch (const Json::exception& e) {
    throw FormatError(path.string() + ": malformed header: " + e.what());
  }
  Checkpoint ck;
  try {
    ck.network.config = network_config_from_json(header.at("config"));
    ck.epochs_completed = header.at("epochs_completed").get<int>();
    if (header.at("layer_dims").get<std::vector<Eigen::Index>>() != ck.network.config.layer_dims)
      throw FormatError(path.string() + ": layer_dims disagree with config");
  } catch (const Json::exception& e) {
    throw FormatError(path.string() + ": malformed header: " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  ck.network.config.validate();

  const auto& dims = ck.network.config.layer_dims;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer{Eigen::MatrixXd(dims[l + 1], dims[l]), Eigen::VectorXd(dims[l + 1])};
    detail::get_doubles(in, layer.weights.data(), layer.weights.size(), path);
    detail::get_doubles(in, layer.bias.data(), layer.bias.size(), path);
    ck.network.layers.push_back(std::move(layer));
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw FormatError(path.string() + ": trailing bytes after parameter block");
  return ck;
}

}  // namespace psnn
