#ifndef LPV_SMPC_RNG_HPP
#define LPV_SMPC_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

#include "lpv_smpc/common.hpp"

namespace lpv_smpc {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/**
 * Counter-based random stream: the k-th draw is a pure function of (key, k).
 *
 * Streams are split by label or index, so every consumer (inputs, scheduling,
 * Monte-Carlo draws, restarts, ...) gets an independent and reproducible
 * sub-stream derived from a single experiment seed. Uniform and normal
 * variates are generated here rather than through <random> distributions so
 * results are bit-identical across standard library implementations.
 */
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : key_(detail::mix64(seed ^ 0x5DEECE66DULL)) {}

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64() {
    ++counter_;
    return detail::mix64(key_ + counter_ * detail::kGolden);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw ValidationError("Rng::below: empty range");
    // Rejection keeps the distribution exactly uniform.
    const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
    std::uint64_t r = next_u64();
    while (r >= limit) r = next_u64();
    return r % n;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  Vec normal_vec(Eigen::Index n) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

  Mat normal_mat(Eigen::Index rows, Eigen::Index cols) {
    Mat m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal();
    return m;
  }

  Vec uniform_in(const Box& box) {
    Vec v(box.dim());
    for (Eigen::Index i = 0; i < box.dim(); ++i) v(i) = uniform(box.lower(i), box.upper(i));
    return v;
  }

  /// Independent child stream identified by a label; does not advance this stream.
  Rng split(std::string_view label) const { return Rng(key_, detail::fnv1a(label)); }

  /// Independent child stream identified by an index; does not advance this stream.
  Rng split(std::uint64_t index) const { return Rng(key_, detail::mix64(index + 0x632BE59BD9B4E019ULL)); }

 private:
  Rng(std::uint64_t parent_key, std::uint64_t salt)
      : key_(detail::mix64(parent_key ^ detail::mix64(salt + detail::kGolden))) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace lpv_smpc

#endif  // LPV_SMPC_RNG_HPP
