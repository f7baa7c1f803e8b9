#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <unistd.h>
#include <zlib.h>

#include "psnn/mnist.hpp"

using namespace psnn;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path d = fs::temp_directory_path() / ("psnn_mnist_test_" + std::to_string(::getpid()));
  fs::create_directories(d);
  return d;
}

void put_be32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  for (int s = 24; s >= 0; s -= 8) v.push_back(static_cast<std::uint8_t>(x >> s));
}

std::vector<std::uint8_t> idx_images(std::uint32_t n, std::uint32_t rows, std::uint32_t cols, std::uint32_t magic = 0x803) {
  std::vector<std::uint8_t> v;
  put_be32(v, magic);
  put_be32(v, n);
  put_be32(v, rows);
  put_be32(v, cols);
  for (std::uint32_t i = 0; i < n * rows * cols; ++i) v.push_back(static_cast<std::uint8_t>((i * 37) & 0xff));
  return v;
}

std::vector<std::uint8_t> idx_labels(std::uint32_t n, std::uint32_t magic = 0x801) {
  std::vector<std::uint8_t> v;
  put_be32(v, magic);
  put_be32(v, n);
  for (std::uint32_t i = 0; i < n; ++i) v.push_back(static_cast<std::uint8_t>(i % 10));
  return v;
}

void write_file(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_gzip(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  gzFile f = gzopen(p.c_str(), "wb");
  gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
  gzclose(f);
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const FormatError& e) {
    return e.what();
  }
  return "";
}

const fs::path kMnistDir = PSNN_MNIST_DIR;

bool have_mnist() {
  return fs::exists(kMnistDir / "t10k-labels-idx1-ubyte") || fs::exists(kMnistDir / "t10k-labels-idx1-ubyte.gz");
}

}  // namespace

TEST(LoadIdx, PlainAndGzipIdentical) {
  const fs::path d = scratch_dir();
  const auto img = idx_images(12, 3, 4);
  const auto lab = idx_labels(12);
  write_file(d / "img", img);
  write_file(d / "lab", lab);
  write_gzip(d / "img.gz", img);
  write_gzip(d / "lab.gz", lab);
  const Dataset a = load_idx(d / "img", d / "lab");
  const Dataset b = load_idx(d / "img.gz", d / "lab.gz");
  EXPECT_EQ(a.size(), 12u);
  EXPECT_EQ(a.input_dim(), 12);
  EXPECT_EQ(a.pixels(), b.pixels());
  EXPECT_EQ(a.labels(), b.labels());
  // file order preserved: sample 1 starts at payload byte 12
  EXPECT_EQ(a.pixels()(0, 1), static_cast<std::uint8_t>((12 * 37) & 0xff));
  EXPECT_EQ(a.labels()[7], 7);
  fs::remove_all(d);
}

TEST(LoadIdx, FormatErrorsNameFileAndOffset) {
  const fs::path d = scratch_dir();
  write_file(d / "img", idx_images(4, 2, 2));
  write_file(d / "lab", idx_labels(4));
  write_file(d / "bad_magic", idx_images(4, 2, 2, 0x804));
  auto truncated = idx_images(4, 2, 2);
  truncated.resize(truncated.size() - 3);
  write_file(d / "short", truncated);
  write_file(d / "lab5", idx_labels(5));
  write_file(d / "tiny", {0, 0, 8});

  std::string msg = error_of([&] { load_idx(d / "bad_magic", d / "lab"); });
  EXPECT_NE(msg.find("bad_magic"), std::string::npos);
  EXPECT_NE(msg.find("offset 0"), std::string::npos);
  msg = error_of([&] { load_idx(d / "short", d / "lab"); });
  EXPECT_NE(msg.find("short"), std::string::npos);
  EXPECT_NE(msg.find("offset 29"), std::string::npos);
  msg = error_of([&] { load_idx(d / "img", d / "lab5"); });
  EXPECT_NE(msg.find("lab5"), std::string::npos);
  EXPECT_NE(msg.find("offset 4"), std::string::npos);
  msg = error_of([&] { load_idx(d / "tiny", d / "lab"); });
  EXPECT_NE(msg.find("truncated header"), std::string::npos);
  msg = error_of([&] { load_idx(d / "missing", d / "lab"); });
  EXPECT_NE(msg.find("missing"), std::string::npos);
  msg = error_of([&] { load_idx(d / "lab", d / "img"); });
  EXPECT_NE(msg.find("bad magic"), std::string::npos);
  fs::remove_all(d);
}

TEST(LoadIdx, CorruptGzipReported) {
  const fs::path d = scratch_dir();
  write_gzip(d / "img.gz", idx_images(50, 28, 28));
  std::ifstream in(d / "img.gz", std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), {});
  bytes.resize(bytes.size() / 2);
  std::ofstream(d / "cut.gz", std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  write_file(d / "lab", idx_labels(50));
  EXPECT_THROW(load_idx(d / "cut.gz", d / "lab"), FormatError);
  fs::remove_all(d);
}

TEST(Dataset, NormalizationAndOneHot) {
  Dataset::PixelMatrix px(2, 3);
  px << 0, 255, 10, 128, 1, 254;
  const Dataset d(px, {3, 0, 9}, Split::test);
  const std::vector<std::size_t> idx{0, 1, 2};
  const Eigen::MatrixXd x = d.images(idx);
  EXPECT_EQ(x(0, 0), 0.0);
  EXPECT_EQ(x(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(x(1, 0), 128.0 / 255.0);
  const Eigen::MatrixXd y = d.targets(idx);
  EXPECT_EQ(y.colwise().sum(), Eigen::RowVectorXd::Ones(3));
  EXPECT_EQ(y(3, 0), 1.0);
  EXPECT_EQ(y(9, 2), 1.0);
  EXPECT_EQ(d.image(1), x.col(1));
  EXPECT_THROW(Dataset(px, {1, 2}, Split::test), FormatError);
  EXPECT_THROW(Dataset(px, {1, 2, 10}, Split::test), FormatError);
}

TEST(Batches, PartitionAndShortLastBatch) {
  RandomStream rng(5);
  const auto b = batches(1000, 128, rng);
  ASSERT_EQ(b.size(), 8u);
  EXPECT_EQ(b.back().size(), 1000u - 7 * 128);
  std::vector<std::size_t> all;
  for (const auto& batch : b) all.insert(all.end(), batch.begin(), batch.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> want(1000);
  std::iota(want.begin(), want.end(), 0);
  EXPECT_EQ(all, want);
}

TEST(Batches, SingleBatchIsPermutation) {
  RandomStream rng(6);
  const auto b = batches(257, 257, rng);
  ASSERT_EQ(b.size(), 1u);
  std::vector<std::size_t> s = b[0];
  std::sort(s.begin(), s.end());
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(s[i], i);
  std::vector<std::size_t> identity(257);
  std::iota(identity.begin(), identity.end(), 0);
  EXPECT_NE(b[0], identity);
}

TEST(Batches, SameSeedSameOrder) {
  RandomStream a = derive_stream(9, StreamPurpose::shuffle, {0}), b = derive_stream(9, StreamPurpose::shuffle, {0});
  EXPECT_EQ(batches(5000, 64, a), batches(5000, 64, b));
  RandomStream c = derive_stream(9, StreamPurpose::shuffle, {1});
  RandomStream a2 = derive_stream(9, StreamPurpose::shuffle, {0});
  EXPECT_NE(batches(5000, 64, a2), batches(5000, 64, c));
}

TEST(Batches, Errors) {
  RandomStream rng(1);
  EXPECT_THROW(batches(0, 4, rng), DomainError);
  EXPECT_THROW(batches(10, 0, rng), DomainError);
}

TEST(Digests, Sha256KnownVectors) {
  const std::string abc = "abc";
  EXPECT_EQ(sha256_hex({reinterpret_cast<const std::uint8_t*>(abc.data()), abc.size()}),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex({}), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Digests, ManifestVerification) {
  const fs::path d = scratch_dir();
  const auto lab = idx_labels(3);
  write_gzip(d / "lab.gz", lab);
  write_file(d / "img", idx_images(3, 1, 1));
  const std::string lab_hash = sha256_hex(lab);
  std::ofstream(d / "manifest") << "# comment\n" << lab_hash << "  lab\n" << std::string(64, '0') << " *img\n"
                                << std::string(64, 'a') << "  gone\n";
  const auto entries = parse_digest_manifest(d / "manifest");
  ASSERT_EQ(entries.size(), 3u);
  EXPECT_EQ(entries[1].filename, "img");
  const auto problems = verify_digests(d, entries);
  ASSERT_EQ(problems.size(), 2u);
  EXPECT_EQ(problems[0].rfind("img:", 0), 0u);
  EXPECT_NE(problems[1].find("gone"), std::string::npos);
  std::ofstream(d / "broken") << "xyz\n";
  EXPECT_THROW(parse_digest_manifest(d / "broken"), FormatError);
  fs::remove_all(d);
}

TEST(RealMnist, SplitsAndTestHistogram) {
  if (!have_mnist()) GTEST_SKIP() << "MNIST not found in " << kMnistDir;
  const Dataset train = load_mnist(kMnistDir, Split::train);
  const Dataset test = load_mnist(kMnistDir, Split::test);
  EXPECT_EQ(train.size(), 60000u);
  EXPECT_EQ(test.size(), 10000u);
  EXPECT_EQ(train.input_dim(), 784);
  const std::vector<int> frozen{980, 1135, 1032, 1010, 982, 892, 958, 1028, 974, 1009};
  std::vector<int> hist(10, 0);
  for (auto l : test.labels()) ++hist[l];
  EXPECT_EQ(hist, frozen);
  for (int c : hist) {
    EXPECT_GE(c, 892);
    EXPECT_LE(c, 1135);
  }
  const std::vector<std::uint8_t> first{5, 0, 4, 1, 9, 2, 1, 3, 1, 4};
  EXPECT_TRUE(std::equal(first.begin(), first.end(), train.labels().begin()));
  EXPECT_EQ(train.pixels().col(0).cast<int>().sum(), 27525);
  EXPECT_EQ(train.pixels().maxCoeff(), 255);
  EXPECT_EQ(train.pixels().minCoeff(), 0);
}

TEST(RealMnist, DigestsMatchManifest) {
  if (!have_mnist()) GTEST_SKIP() << "MNIST not found in " << kMnistDir;
  const auto problems = verify_digests(kMnistDir, parse_digest_manifest(PSNN_MNIST_MANIFEST));
  EXPECT_TRUE(problems.empty()) << problems.front();
}

TEST(RealMnist, ReloadIdentical) {
  if (!have_mnist()) GTEST_SKIP() << "MNIST not found in " << kMnistDir;
  const Dataset a = load_mnist(kMnistDir, Split::test), b = load_mnist(kMnistDir, Split::test);
  const std::vector<std::size_t> idx{0, 17, 9999};
  EXPECT_EQ(a.images(idx), b.images(idx));
  EXPECT_EQ(a.targets(idx), b.targets(idx));
}
