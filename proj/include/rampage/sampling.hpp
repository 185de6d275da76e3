#pragma once

#include <cstdint>
#include <random>

namespace rampage {

/// Seeded uniform/Gaussian stream.
///
/// Generator: std::mt19937_64 keyed through std::seed_seq with the words
/// (seed lo, seed hi, stream lo, stream hi, substream lo, substream hi).
/// Both the engine and seed_seq are fully specified by the C++ standard, so
/// the uniform sequence for a given key is identical on every conforming
/// toolchain. Uniforms use the top 53 bits of each engine output.
///
/// A stream is single-owner. Trial t of an experiment uses stream_id = t.
class RandomStream {
 public:
  static constexpr std::uint32_t kGeneratorVersion = 1;

  RandomStream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t substream = 0);

  /// Independent stream keyed by (seed, stream_id, index + 1).
  RandomStream substream(std::uint64_t index) const;

  /// Uniform on [0, 1). Advances the engine by exactly one output.
  double uniform();
  /// Standard normal via std::normal_distribution.
  double normal();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t substream_index() const { return substream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t substream_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

struct AntitheticDraw {
  double u = 0.5;
  double u_tilde = 0.5;

  static AntitheticDraw from(double u) { return {u, 1.0 - u}; }
};

double draw_uniform(RandomStream& stream);

/// One underlying draw; u_tilde = 1.0 - u.
AntitheticDraw draw_antithetic(RandomStream& stream);

struct SampleMoments {
  double m1 = 0, m2 = 0, m3 = 0;     // means of u, u^2, u^3
  double se1 = 0, se2 = 0, se3 = 0;  // standard errors of those means
  std::uint64_t n = 0;
};

SampleMoments empirical_moments(RandomStream& stream, std::uint64_t n);

}  // namespace rampage
