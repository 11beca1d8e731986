#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace mint {

// Deterministic random source. All draw paths are implemented here rather
// than through std distributions so sequences are reproducible independent of
// the standard library build.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Inclusive bounds.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    // Rejection sampling keeps the draw unbiased.
    uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t r;
    do {
      r = eng_();
    } while (r >= limit);
    return lo + static_cast<int64_t>(r % span);
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Marsaglia polar method with one cached deviate.
  double normal(double mean = 0.0, double sd = 1.0) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + sd * spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return mean + sd * u * m;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Independent child stream; distinct labels give distinct streams.
  Rng fork(uint64_t label) {
    const uint64_t material[3] = {static_cast<uint64_t>(eng_()), label,
                                  0x9e3779b97f4a7c15ull};
    std::seed_seq seq(std::begin(material), std::end(material));
    std::mt19937_64 child(seq);
    Rng out(0);
    out.eng_ = child;
    return out;
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mint
