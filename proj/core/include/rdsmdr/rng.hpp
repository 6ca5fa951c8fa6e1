#pragma once

#include <cstdint>
#include <random>

namespace rdsmdr {

// splitmix64 finalizer, used to fold index paths into engine seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/**
 * Deterministic family of random streams.
 *
 * A stream is identified by a root seed plus a path of child indices:
 * stream(root).child(a).child(b) always names the same stream, and distinct
 * paths give statistically independent engines. Every parallel unit of work
 * (network g, sample s, bootstrap replicate b, ...) derives its own stream
 * from the root seed by index, so results never depend on thread scheduling.
 */
class RngStream {
public:
  explicit RngStream(std::uint64_t seed) : key_(splitmix64(seed ^ 0x6a09e667f3bcc909ULL)) {}

  RngStream child(std::uint64_t index) const {
    RngStream s(*this);
    s.key_ = splitmix64(key_ ^ splitmix64(index + 0x9e3779b97f4a7c15ULL));
    return s;
  }

  std::mt19937_64 engine() const { return std::mt19937_64(key_); }
  std::uint64_t key() const noexcept { return key_; }

private:
  std::uint64_t key_;
};

}  // namespace rdsmdr
