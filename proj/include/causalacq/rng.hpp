#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Core>

namespace causalacq {

using Rng = std::mt19937_64;

/// 64-bit FNV-1a over a canonical little-endian byte encoding. Used to derive
/// independent, platform-stable seeds from structured keys.
class SeedHasher {
 public:
  static constexpr std::uint64_t kOffset = 0xcbf29ce484222325ULL;
  static constexpr std::uint64_t kPrime = 0x100000001b3ULL;

  SeedHasher& add(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) byte(static_cast<unsigned char>((v >> (8 * i)) & 0xffU));
    return *this;
  }
  SeedHasher& add(std::int64_t v) { return add(static_cast<std::uint64_t>(v)); }
  SeedHasher& add(int v) { return add(static_cast<std::uint64_t>(static_cast<std::int64_t>(v))); }
  SeedHasher& add(std::string_view s) {
    add(static_cast<std::uint64_t>(s.size()));
    for (char c : s) byte(static_cast<unsigned char>(c));
    return *this;
  }
  SeedHasher& add(const char* s) { return add(std::string_view(s)); }

  std::uint64_t value() const noexcept { return state_; }

 private:
  void byte(unsigned char b) {
    state_ ^= b;
    state_ *= kPrime;
  }
  std::uint64_t state_ = kOffset;
};

template <typename... Parts>
std::uint64_t derive_seed(const Parts&... parts) {
  SeedHasher h;
  (h.add(parts), ...);
  return h.value();
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform index in [0, bound).
inline std::size_t uniform_index(Rng& rng, std::size_t bound) {
  return static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(bound));
}

inline Eigen::VectorXd standard_normal(Rng& rng, Eigen::Index p) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(p);
  for (Eigen::Index k = 0; k < p; ++k) z[k] = normal(rng);
  return z;
}

/// Uniform draw on the unit sphere S^{p-1}.
inline Eigen::VectorXd uniform_sphere(Rng& rng, Eigen::Index p) {
  Eigen::VectorXd z = standard_normal(rng, p);
  double norm = z.norm();
  while (norm == 0.0) {
    z = standard_normal(rng, p);
    norm = z.norm();
  }
  return z / norm;
}

}  // namespace causalacq
