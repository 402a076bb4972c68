#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string_view>
#include <vector>

namespace bpe::rng {

// Philox4x32-10 counter-based generator. Every consumer derives its own key
// from (master seed, purpose tag, indices), so streams are independent and
// reproducible across platforms and thread schedules.
std::array<std::uint32_t, 4> philox4x32(std::uint64_t key, std::uint64_t counter);

std::uint64_t splitmix64(std::uint64_t x);

// Deterministic stream key; independent streams for distinct (master, tag, indices).
std::uint64_t derive_key(std::uint64_t master, std::string_view tag,
                         std::initializer_list<std::uint64_t> indices = {});

class Stream {
public:
  explicit Stream(std::uint64_t key) : key_(key) {}
  Stream(std::uint64_t master, std::string_view tag,
         std::initializer_list<std::uint64_t> indices = {})
      : Stream(derive_key(master, tag, indices)) {}

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 random bits.
  double next_double();

  // Standard normal via Box-Muller (pairs cached).
  double next_gaussian();

  // Uniform integer in [0, n); n must be > 0.
  std::uint64_t next_below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

private:
  std::uint64_t key_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int pos_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace bpe::rng
