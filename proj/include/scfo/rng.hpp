#ifndef SCFO_RNG_HPP
#define SCFO_RNG_HPP

#include <cmath>
#include <cstdint>

#include <Eigen/Core>

namespace scfo {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ (0x632be59bd9b4e019ull + (b << 1)));
}

// Deterministic random stream: splittable, with uniform/normal generation
// that avoids library-specific distribution internals so trajectories are
// reproducible bit-for-bit for a fixed seed.
class SplitRng {
 public:
  explicit SplitRng(std::uint64_t seed) : state_(seed) {}

  // Derive an independent substream; the parent is unchanged.
  SplitRng split(std::uint64_t stream) const { return SplitRng(mix_seed(state_, stream)); }

  std::uint64_t next_raw() {
    state_ = splitmix64(state_);
    return state_;
  }

  double uniform() { return static_cast<double>(next_raw() >> 11) * 0x1.0p-53; }
  double uniform_pm() { return 2.0 * uniform() - 1.0; }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  double normal_truncated(double max_abs_sigmas) {
    for (;;) {
      const double v = normal();
      if (std::abs(v) <= max_abs_sigmas) return v;
    }
  }

  Eigen::VectorXd unit_vector(int n) {
    Eigen::VectorXd v(n);
    double norm2 = 0.0;
    do {
      for (int i = 0; i < n; ++i) v(i) = normal();
      norm2 = v.squaredNorm();
    } while (norm2 < 1e-24);
    return v / std::sqrt(norm2);
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace scfo

#endif  // SCFO_RNG_HPP
