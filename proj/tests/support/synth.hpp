#pragma once

// Synthetic audio for tests: class-dependent tone patterns plus noise.

#include <cmath>
#include <random>
#include <vector>

namespace synth {

inline std::vector<double> random_clip(std::uint64_t seed, std::size_t n = 16000, double amp = 0.3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amp, amp);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

inline std::vector<double> sine(double hz, double amp = 0.5, std::size_t n = 16000) {
  std::vector<double> v(n);
  const double pi = std::acos(-1.0);
  for (std::size_t i = 0; i < n; ++i) v[i] = amp * std::sin(2.0 * pi * hz * static_cast<double>(i) / 16000.0);
  return v;
}

// A "keyword": a tone burst whose frequency band depends on the class, with
// random onset, pitch jitter, and a noise floor.
inline std::vector<double> keyword(std::size_t cls, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.05, 0.05);
  std::uniform_int_distribution<std::size_t> onset(1000, 5000);
  std::normal_distribution<double> noise(0.0, 0.01);
  const double base = 300.0 * std::pow(2.0, static_cast<double>(cls) * 0.8) * (1.0 + jitter(rng));
  const std::size_t start = onset(rng), len = 8000;
  const double pi = std::acos(-1.0);
  std::vector<double> v(16000);
  for (std::size_t i = 0; i < v.size(); ++i) {
    double s = noise(rng);
    if (i >= start && i < start + len) {
      const double t = static_cast<double>(i - start) / 16000.0;
      const double env = std::sin(pi * static_cast<double>(i - start) / static_cast<double>(len));
      s += 0.4 * env * (std::sin(2 * pi * base * t) + 0.5 * std::sin(2 * pi * 2.0 * base * t));
    }
    v[i] = std::clamp(s, -1.0, 1.0);
  }
  return v;
}

}  // namespace synth
