#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace mlmcmc {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
///
/// The 64-bit key selects the stream; the 128-bit counter walks through it.
/// Two engines with different keys never share state, so replicas and levels
/// can each own one without coordination. Satisfies
/// UniformRandomBitGenerator with 64-bit output.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t key);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal deviate (Box-Muller, second value cached).
  double normal();

  std::uint64_t key() const { return key_; }

 private:
  void refill();

  std::uint64_t key_;
  std::array<std::uint32_t, 4> counter_{};
  std::array<std::uint64_t, 2> block_{};
  int next_ = 2;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// What a stream is used for; keeps e.g. data generation and chain
/// stepping apart even when level/replica coincide.
enum class StreamPurpose : std::uint32_t {
  Chain = 0,
  Screening = 1,
  Data = 2,
  Baseline = 3,
  Oracle = 4,
};

/// Stream key for replica `replica` at level `level` under `master_seed`.
/// Deterministic and order-independent, so results never depend on which
/// worker thread ran a replica.
std::uint64_t derive_seed(std::uint64_t master_seed, int level, std::uint64_t replica,
                          StreamPurpose purpose = StreamPurpose::Chain);

/// One Philox4x32-10 block; exposed for known-answer testing.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// 64-bit finalizer from SplitMix64.
std::uint64_t mix64(std::uint64_t x);

}  // namespace mlmcmc
