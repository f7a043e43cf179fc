#include "dtu/rng.hpp"

#include <cmath>
#include <stdexcept>

#include "dtu/math_portable.hpp"

namespace dtu {

int Rng::uniform_int(int n) {
  if (n <= 0) throw std::invalid_argument("Rng::uniform_int: n must be positive");
  const auto un = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % un + 1) % un;
  std::uint64_t u = next_u64();
  while (u > limit) u = next_u64();
  return static_cast<int>(u % un);
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  const double u1 = uniform_pos();
  const double u2 = uniform();
  const double mag = std::sqrt(-2.0 * plog(u1));
  constexpr double kTwoPi = 6.28318530717958647693;
  spare_ = mag * psin(kTwoPi * u2);
  have_spare_ = true;
  return mag * pcos(kTwoPi * u2);
}

std::vector<int> Rng::sample_without_replacement(int n, int k) {
  if (k < 0 || k > n) throw std::invalid_argument("sample_without_replacement: bad k");
  std::vector<int> pool(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < k; ++i) {
    const int j = i + uniform_int(n - i);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(k));
  return pool;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t x = a + 0x9e3779b97f4a7c15ULL;
  auto mix = [](std::uint64_t v) {
    v ^= v >> 30;
    v *= 0xbf58476d1ce4e5b9ULL;
    v ^= v >> 27;
    v *= 0x94d049bb133111ebULL;
    v ^= v >> 31;
    return v;
  };
  x = mix(x);
  x = mix(x ^ (b + 0x9e3779b97f4a7c15ULL));
  x = mix(x ^ (c + 0x9e3779b97f4a7c15ULL));
  return x;
}

}  // namespace dtu
