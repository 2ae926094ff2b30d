#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>

namespace vilslam {

// splitmix64 step; used to derive independent per-stream seeds so modules
// never share generator state (determinism across pipeline modes).
uint64_t derive_seed(uint64_t base, uint64_t stream);

// Deterministic generator. Gaussian via hand-rolled Box-Muller so sequences
// are identical across standard libraries (std::normal_distribution is
// implementation-defined).
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  int uniform_int(int n);                 // {0, ..., n-1}
  double gaussian();                      // N(0, 1)
  double gaussian_truncated(double nsigma);  // N(0,1) conditioned on |x|<=nsigma

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// 256-bit binary descriptor.
struct Descriptor256 {
  std::array<uint64_t, 4> words{0, 0, 0, 0};

  static Descriptor256 random(Rng& rng);
  Descriptor256 with_flipped_bits(int count, Rng& rng) const;
  int hamming(const Descriptor256& other) const;
  std::string to_hex() const;
  static Descriptor256 from_hex(const std::string& hex);
  friend bool operator==(const Descriptor256& a, const Descriptor256& b) {
    return a.words == b.words;
  }
};

}  // namespace vilslam
