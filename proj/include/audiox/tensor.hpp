#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>

namespace audiox {

using Index = Eigen::Index;

/// Row-major dense matrix. Rows are tokens (or time frames), columns are features.
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Rng = std::mt19937_64;

/// Deterministic stream derived from a base seed and a list of keys (step, item, ...).
inline Rng keyed_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::vector<std::uint32_t> words;
  words.push_back(static_cast<std::uint32_t>(seed));
  words.push_back(static_cast<std::uint32_t>(seed >> 32));
  for (auto k : keys) {
    words.push_back(static_cast<std::uint32_t>(k));
    words.push_back(static_cast<std::uint32_t>(k >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

template <typename Scalar>
Mat<Scalar> randn(Index rows, Index cols, Rng& rng, double stddev = 1.0) {
  std::normal_distribution<double> normal(0.0, stddev);
  Mat<Scalar> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(normal(rng));
  return m;
}

/// Sinusoidal position / timestep features: first half sin, second half cos.
template <typename Scalar>
RowVec<Scalar> sinusoid(double position, Index dim, double max_period = 10000.0) {
  RowVec<Scalar> out = RowVec<Scalar>::Zero(dim);
  const Index half = dim / 2;
  for (Index i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(max_period) * static_cast<double>(i) / static_cast<double>(half));
    out(i) = static_cast<Scalar>(std::sin(position * freq));
    out(half + i) = static_cast<Scalar>(std::cos(position * freq));
  }
  return out;
}

template <typename Scalar>
Mat<Scalar> sinusoid_table(Index rows, Index dim) {
  Mat<Scalar> out(rows, dim);
  for (Index r = 0; r < rows; ++r) out.row(r) = sinusoid<Scalar>(static_cast<double>(r), dim);
  return out;
}

}  // namespace audiox
