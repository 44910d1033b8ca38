#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

#include "gpct/errors.hpp"

namespace gpct {

/// Axis-aligned box [lower, upper] in R^d.
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int dim() const { return static_cast<int>(lower.size()); }
  void validate() const {
    if (lower.size() != upper.size()) throw InputError("box: bound sizes differ");
    if (lower.size() == 0) throw InputError("box: empty domain");
    if (!lower.allFinite() || !upper.allFinite())
      throw InputError("box: non-finite bounds");
    if ((upper.array() < lower.array()).any())
      throw InputError("box: upper bound below lower bound");
  }
  bool contains(const Eigen::VectorXd& x) const {
    return x.size() == lower.size() && (x.array() >= lower.array()).all() &&
           (x.array() <= upper.array()).all();
  }
  Box concat(const Box& other) const {
    Box b{Eigen::VectorXd(dim() + other.dim()), Eigen::VectorXd(dim() + other.dim())};
    b.lower << lower, other.lower;
    b.upper << upper, other.upper;
    return b;
  }
};

/// Uniform double in [0, 1) from the top 53 bits; portable across standard
/// libraries unlike std::uniform_real_distribution.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline Eigen::VectorXd sample_uniform(const Box& box, std::mt19937_64& rng) {
  Eigen::VectorXd x(box.dim());
  for (int i = 0; i < box.dim(); ++i)
    x[i] = box.lower[i] + (box.upper[i] - box.lower[i]) * unit_uniform(rng);
  return x;
}

/// splitmix64 finalizer, for deriving independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace gpct
