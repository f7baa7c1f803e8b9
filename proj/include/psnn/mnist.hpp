#pragma once

// MNIST ingestion: IDX containers (optionally gzip-wrapped), normalization to
// [0,1], one-hot targets, seeded Fisher-Yates batching and digest manifests.

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <openssl/evp.h>
#include <zlib.h>

#include "psnn/errors.hpp"
#include "psnn/random.hpp"

namespace psnn {

enum class Split { train, test };

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr int kMnistClasses = 10;

/// Immutable image/label collection. Pixels are kept as bytes (one column
/// per sample) and normalized by 1/255 when gathered.
class Dataset {
 public:
  using PixelMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

  Dataset(PixelMatrix pixels, std::vector<std::uint8_t> labels, Split split)
      : pixels_(std::move(pixels)), labels_(std::move(labels)), split_(split) {
    if (static_cast<std::size_t>(pixels_.cols()) != labels_.size())
      throw FormatError("Dataset: image count does not match label count");
    for (auto l : labels_)
      if (l >= kMnistClasses) throw FormatError("Dataset: label out of range");
  }

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  Eigen::Index input_dim() const { return pixels_.rows(); }
  Split split() const { return split_; }
  const std::vector<std::uint8_t>& labels() const { return labels_; }
  const PixelMatrix& pixels() const { return pixels_; }

  Eigen::VectorXd image(std::size_t i) const { return pixels_.col(static_cast<Eigen::Index>(i)).cast<double>() / 255.0; }
  Eigen::VectorXd target(std::size_t i) const {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(kMnistClasses);
    y(labels_.at(i)) = 1.0;
    return y;
  }

  /// Normalized images for the given sample indices, one column each.
  Eigen::MatrixXd images(std::span<const std::size_t> idx) const {
    Eigen::MatrixXd out(pixels_.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c)
      out.col(static_cast<Eigen::Index>(c)) =
          pixels_.col(static_cast<Eigen::Index>(idx[c])).cast<double>() / 255.0;
    return out;
  }

  /// One-hot targets for the given sample indices.
  Eigen::MatrixXd targets(std::span<const std::size_t> idx) const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(kMnistClasses, static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) out(labels_.at(idx[c]), static_cast<Eigen::Index>(c)) = 1.0;
    return out;
  }

 private:
  PixelMatrix pixels_;
  std::vector<std::uint8_t> labels_;
  Split split_;
};

namespace detail {

/// Whole file contents; gzip streams are inflated, plain files pass through.
inline std::vector<std::uint8_t> read_maybe_gzip(const std::filesystem::path& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (f == nullptr) throw FormatError("cannot open " + path.string());
  std::vector<std::uint8_t> data;
  std::array<std::uint8_t, 1 << 16> buf{};
  for (;;) {
    const int n = gzread(f, buf.data(), static_cast<unsigned>(buf.size()));
    if (n < 0) {
      int err = 0;
      const std::string msg = gzerror(f, &err);
      gzclose(f);
      throw FormatError(path.string() + ": decompression failed at offset " + std::to_string(data.size()) +
                        ": " + msg);
    }
    if (n == 0) break;
    data.insert(data.end(), buf.begin(), buf.begin() + n);
  }
  gzclose(f);
  return data;
}

inline std::uint32_t read_be32(const std::vector<std::uint8_t>& d, std::size_t offset,
                               const std::filesystem::path& path) {
  if (offset + 4 > d.size())
    throw FormatError(path.string() + ": truncated header at offset " + std::to_string(offset));
  return (std::uint32_t{d[offset]} << 24) | (std::uint32_t{d[offset + 1]} << 16) |
         (std::uint32_t{d[offset + 2]} << 8) | std::uint32_t{d[offset + 3]};
}

inline void require_magic(std::uint32_t got, std::uint32_t want, const std::filesystem::path& path) {
  if (got != want) {
    char msg[96];
    std::snprintf(msg, sizeof msg, ": bad magic 0x%08x at offset 0 (expected 0x%08x)", got, want);
    throw FormatError(path.string() + msg);
  }
}

inline void require_payload(const std::vector<std::uint8_t>& d, std::size_t offset, std::size_t bytes,
                            const std::filesystem::path& path) {
  if (d.size() < offset + bytes)
    throw FormatError(path.string() + ": truncated payload at offset " + std::to_string(d.size()) +
                      " (expected " + std::to_string(offset + bytes) + " bytes)");
}

}  // namespace detail

/// Reads an IDX image file (magic 0x00000803) and label file (0x00000801).
inline Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                        Split split = Split::train) {
  const auto img = detail::read_maybe_gzip(images_path);
  detail::require_magic(detail::read_be32(img, 0, images_path), kIdxImageMagic, images_path);
  const std::size_t n = detail::read_be32(img, 4, images_path);
  const std::size_t rows = detail::read_be32(img, 8, images_path);
  const std::size_t cols = detail::read_be32(img, 12, images_path);
  const std::size_t dim = rows * cols;
  detail::require_payload(img, 16, n * dim, images_path);

  const auto lab = detail::read_maybe_gzip(labels_path);
  detail::require_magic(detail::read_be32(lab, 0, labels_path), kIdxLabelMagic, labels_path);
  const std::size_t n_labels = detail::read_be32(lab, 4, labels_path);
  if (n_labels != n)
    throw FormatError(labels_path.string() + ": label count " + std::to_string(n_labels) + " at offset 4 != image count " +
                      std::to_string(n) + " in " + images_path.string());
  detail::require_payload(lab, 8, n, labels_path);

  Dataset::PixelMatrix pixels(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(n));
  std::copy(img.begin() + 16, img.begin() + 16 + static_cast<std::ptrdiff_t>(n * dim), pixels.data());
  std::vector<std::uint8_t> labels(lab.begin() + 8, lab.begin() + 8 + static_cast<std::ptrdiff_t>(n));
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i] >= kMnistClasses)
      throw FormatError(labels_path.string() + ": label " + std::to_string(labels[i]) + " at offset " +
                        std::to_string(8 + i) + " is not a digit");
  return Dataset(std::move(pixels), std::move(labels), split);
}

/// Path of an IDX file in `dir`, preferring the uncompressed name.
inline std::filesystem::path find_idx_file(const std::filesystem::path& dir, const std::string& stem) {
  for (const auto& name : {stem, stem + ".gz"})
    if (std::filesystem::exists(dir / name)) return dir / name;
  throw FormatError("missing " + (dir / stem).string() + "[.gz]");
}

/// Loads the canonical train (60000) or test (10000) split from `dir`.
inline Dataset load_mnist(const std::filesystem::path& dir, Split split) {
  const std::string prefix = split == Split::train ? "train" : "t10k";
  Dataset d = load_idx(find_idx_file(dir, prefix + "-images-idx3-ubyte"),
                       find_idx_file(dir, prefix + "-labels-idx1-ubyte"), split);
  const std::size_t expected = split == Split::train ? 60000 : 10000;
  if (d.size() != expected || d.input_dim() != 784)
    throw FormatError(dir.string() + ": expected " + std::to_string(expected) + " samples of 784 pixels, got " +
                      std::to_string(d.size()) + " of " + std::to_string(d.input_dim()));
  return d;
}

/// Fisher-Yates permutation of [0, n) drawn from `rng`, cut into batches of
/// `batch_size`; the last batch may be short.
inline std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size, RandomStream& rng) {
  if (n == 0) throw DomainError("batches: empty dataset");
  if (batch_size == 0) throw DomainError("batches: batch_size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(order[i], order[pick(rng)]);
  }
  std::vector<std::vector<std::size_t>> out;
  out.reserve((n + batch_size - 1) / batch_size);
  for (std::size_t start = 0; start < n; start += batch_size)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
  return out;
}

inline std::vector<std::vector<std::size_t>> batches(const Dataset& data, std::size_t batch_size, RandomStream& rng) {
  return batches(data.size(), batch_size, rng);
}

/// SHA-256 of a byte buffer as lowercase hex.
inline std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256: digest computation failed");
  std::string hex;
  hex.reserve(2 * len);
  static constexpr char kDigits[] = "0123456789abcdef";
  for (unsigned i = 0; i < len; ++i) {
    hex.push_back(kDigits[md[i] >> 4]);
    hex.push_back(kDigits[md[i] & 0xf]);
  }
  return hex;
}

struct DigestEntry {
  std::string sha256;
  std::string filename;
};

/// Parses `<sha256>  <filename>` lines (sha256sum format); '#' starts a comment.
inline std::vector<DigestEntry> parse_digest_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open digest manifest " + path.string());
  std::vector<DigestEntry> entries;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    DigestEntry e;
    if (!(ls >> e.sha256 >> e.filename) || e.sha256.size() != 64)
      throw FormatError(path.string() + ": malformed line " + std::to_string(lineno));
    if (!e.filename.empty() && e.filename[0] == '*') e.filename.erase(0, 1);
    entries.push_back(std::move(e));
  }
  return entries;
}

/// Checks every manifest entry against `dir`. Digests cover the uncompressed
/// IDX payload, so `name` may also be present as `name.gz`. Returns one
/// message per missing or mismatching file; empty means all verified.
inline std::vector<std::string> verify_digests(const std::filesystem::path& dir,
                                               const std::vector<DigestEntry>& manifest) {
  std::vector<std::string> problems;
  for (const auto& e : manifest) {
    try {
      const auto bytes = detail::read_maybe_gzip(find_idx_file(dir, e.filename));
      const std::string got = sha256_hex(bytes);
      if (got != e.sha256) problems.push_back(e.filename + ": sha256 " + got + " != " + e.sha256);
    } catch (const FormatError& err) {
      problems.emplace_back(err.what());
    }
  }
  return problems;
}

}  // namespace psnn
