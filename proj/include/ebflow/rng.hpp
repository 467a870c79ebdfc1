#pragma once

#include <array>
#include <cstdint>

#include <Eigen/Dense>

namespace ebflow {

/// Counter-based generator: Philox4x32 with 10 rounds.
///
/// The 64-bit seed is the Philox key. The 128-bit counter is split into a
/// 64-bit stream id (high words) and a 64-bit block index (low words), so
/// (seed, stream) fully determines the sequence and streams never overlap.
/// Each block yields four 32-bit words, consumed as two 64-bit values.
///
/// Derived draws:
///  - uniform(): top 53 bits of a 64-bit value, scaled to [0, 1).
///  - normal(): Box-Muller on two open-interval uniforms; both outputs of a
///    pair are used (cosine branch first).
///  - uniform_index(n): multiply-shift of a 64-bit value.
class Rng {
 public:
  static constexpr const char* kName = "philox4x32-10";
  static constexpr int kVersion = 1;

  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0);

  /// Independent generator for the same seed and a different stream.
  [[nodiscard]] Rng split(std::uint64_t stream) const { return Rng(seed_, stream); }

  std::uint64_t next_u64();
  double uniform();
  double uniform_open();  // (0, 1)
  double normal();
  std::size_t uniform_index(std::size_t n);

  void fill_normal(Eigen::Ref<Eigen::VectorXd> out);
  [[nodiscard]] Eigen::VectorXd normal_vector(Eigen::Index n);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  bool operator==(const Rng& other) const = default;

  /// One Philox4x32-10 block; exposed for known-answer tests.
  static std::array<std::uint32_t, 4> philox_block(std::array<std::uint32_t, 4> counter,
                                                    std::array<std::uint32_t, 2> key);

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffer_pos_ = 4;  // in 64-bit units of two words; 4 means exhausted
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

/// Stream ids used by the data generator and fitters.
namespace streams {
inline constexpr std::uint64_t kDesign = 1;
inline constexpr std::uint64_t kTheta = 2;
inline constexpr std::uint64_t kNoise = 3;
inline constexpr std::uint64_t kTestDesign = 4;
inline constexpr std::uint64_t kFit = 16;
}  // namespace streams

}  // namespace ebflow
