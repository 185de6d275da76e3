#include "rampage/sampling.hpp"

#include <cmath>
#include <stdexcept>

#include "rampage/errors.hpp"

namespace rampage {

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t sub) {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), lo(stream_id), hi(stream_id), lo(sub), hi(sub)};
  return std::mt19937_64(seq);
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t substream)
    : seed_(seed),
      stream_id_(stream_id),
      substream_(substream),
      engine_(make_engine(seed, stream_id, substream)) {}

RandomStream RandomStream::substream(std::uint64_t index) const {
  return RandomStream(seed_, stream_id_, index + 1);
}

double RandomStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RandomStream::normal() { return normal_(engine_); }

double draw_uniform(RandomStream& stream) { return stream.uniform(); }

AntitheticDraw draw_antithetic(RandomStream& stream) {
  return AntitheticDraw::from(stream.uniform());
}

SampleMoments empirical_moments(RandomStream& stream, std::uint64_t n) {
  if (n == 0) throw ContractViolation("empirical_moments: n must be >= 1");
  // Welford on (u, u^2, u^3) jointly.
  double mean[3] = {0, 0, 0};
  double m2[3] = {0, 0, 0};
  for (std::uint64_t i = 0; i < n; ++i) {
    const double u = stream.uniform();
    const double x[3] = {u, u * u, u * u * u};
    const double k = static_cast<double>(i + 1);
    for (int j = 0; j < 3; ++j) {
      const double d = x[j] - mean[j];
      mean[j] += d / k;
      m2[j] += d * (x[j] - mean[j]);
    }
  }
  SampleMoments out;
  out.n = n;
  out.m1 = mean[0];
  out.m2 = mean[1];
  out.m3 = mean[2];
  if (n > 1) {
    const double dn = static_cast<double>(n);
    out.se1 = std::sqrt(m2[0] / (dn - 1) / dn);
    out.se2 = std::sqrt(m2[1] / (dn - 1) / dn);
    out.se3 = std::sqrt(m2[2] / (dn - 1) / dn);
  }
  return out;
}

}  // namespace rampage
