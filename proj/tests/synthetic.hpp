#pragma once

// Small in-memory datasets for tests that must not depend on MNIST.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "psnn/mnist.hpp"
#include "psnn/random.hpp"

namespace test_data {

/// Uniform random pixels with labels independent of the pixels.
inline psnn::Dataset random_dataset(std::size_t n, Eigen::Index dim, std::uint64_t seed) {
  psnn::RandomStream rng = psnn::derive_stream(seed, psnn::StreamPurpose::oracle, {7});
  psnn::Dataset::PixelMatrix px(dim, static_cast<Eigen::Index>(n));
  std::vector<std::uint8_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index r = 0; r < dim; ++r) px(r, static_cast<Eigen::Index>(i)) = static_cast<std::uint8_t>(rng() & 0xff);
    labels[i] = static_cast<std::uint8_t>(rng() % 10);
  }
  return psnn::Dataset(std::move(px), std::move(labels), psnn::Split::test);
}

/// Pixels labelled by a fixed random linear teacher (argmax of 10 scores),
/// so a small network can learn the mapping.
inline psnn::Dataset teacher_dataset(std::size_t n, Eigen::Index dim, std::uint64_t seed,
                                     psnn::Split split = psnn::Split::train) {
  psnn::RandomStream rng = psnn::derive_stream(seed, psnn::StreamPurpose::oracle, {8});
  Eigen::MatrixXd teacher(10, dim);
  for (Eigen::Index c = 0; c < dim; ++c)
    for (Eigen::Index r = 0; r < 10; ++r) teacher(r, c) = 2 * psnn::uniform01(rng) - 1;
  psnn::Dataset::PixelMatrix px(dim, static_cast<Eigen::Index>(n));
  std::vector<std::uint8_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd x(dim);
    for (Eigen::Index r = 0; r < dim; ++r) {
      px(r, static_cast<Eigen::Index>(i)) = static_cast<std::uint8_t>(rng() & 0xff);
      x(r) = px(r, static_cast<Eigen::Index>(i)) / 255.0 - 0.5;
    }
    Eigen::Index best = 0;
    (teacher * x).maxCoeff(&best);
    labels[i] = static_cast<std::uint8_t>(best);
  }
  return psnn::Dataset(std::move(px), std::move(labels), split);
}

}  // namespace test_data
