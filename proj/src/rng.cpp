#include "vilslam/rng.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace vilslam {

uint64_t derive_seed(uint64_t base, uint64_t stream) {
  uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  // 53-bit mantissa from the top bits.
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::uniform_int(int n) {
  if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
  // Rejection sampling for an unbiased result.
  const uint64_t un = static_cast<uint64_t>(n);
  const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<int>(x % un);
}

double Rng::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1, u2;
  do {
    u1 = uniform();
  } while (u1 <= 1e-300);
  u2 = uniform();
  const double mag = std::sqrt(-2.0 * std::log(u1));
  spare_ = mag * std::sin(2.0 * M_PI * u2);
  has_spare_ = true;
  return mag * std::cos(2.0 * M_PI * u2);
}

double Rng::gaussian_truncated(double nsigma) {
  double x;
  do {
    x = gaussian();
  } while (std::abs(x) > nsigma);
  return x;
}

Descriptor256 Descriptor256::random(Rng& rng) {
  Descriptor256 d;
  for (auto& w : d.words)
    w = (static_cast<uint64_t>(rng.uniform_int(1 << 16)) << 48) ^
        (static_cast<uint64_t>(rng.uniform_int(1 << 16)) << 32) ^
        (static_cast<uint64_t>(rng.uniform_int(1 << 16)) << 16) ^
        static_cast<uint64_t>(rng.uniform_int(1 << 16));
  return d;
}

Descriptor256 Descriptor256::with_flipped_bits(int count, Rng& rng) const {
  Descriptor256 d = *this;
  // Flip `count` distinct positions.
  std::array<int, 256> taken{};
  int flipped = 0;
  while (flipped < count) {
    int pos = rng.uniform_int(256);
    if (taken[pos]) continue;
    taken[pos] = 1;
    d.words[pos >> 6] ^= (1ULL << (pos & 63));
    ++flipped;
  }
  return d;
}

int Descriptor256::hamming(const Descriptor256& other) const {
  int h = 0;
  for (int i = 0; i < 4; ++i) h += std::popcount(words[i] ^ other.words[i]);
  return h;
}

std::string Descriptor256::to_hex() const {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (int i = 0; i < 4; ++i)
    for (int shift = 60; shift >= 0; shift -= 4)
      s.push_back(digits[(words[i] >> shift) & 0xF]);
  return s;
}

Descriptor256 Descriptor256::from_hex(const std::string& hex) {
  if (hex.size() != 64)
    throw std::invalid_argument("Descriptor256: hex string must be 64 chars");
  Descriptor256 d;
  for (int i = 0; i < 64; ++i) {
    char c = hex[i];
    uint64_t v;
    if (c >= '0' && c <= '9') v = c - '0';
    else if (c >= 'a' && c <= 'f') v = 10 + c - 'a';
    else if (c >= 'A' && c <= 'F') v = 10 + c - 'A';
    else throw std::invalid_argument("Descriptor256: bad hex digit");
    d.words[i / 16] = (d.words[i / 16] << 4) | v;
  }
  return d;
}

}  // namespace vilslam
