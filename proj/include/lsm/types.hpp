#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>

namespace lsm {

// State dimensions are dynamic but capped so the dense types live on the
// stack; the integrators and manifold quadrature run millions of small
// vector ops and must not allocate per step.
inline constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

/// Closed parameter interval.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const { return v >= lo && v <= hi; }
  double clamp(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
  double width() const { return hi - lo; }
  double midpoint() const { return 0.5 * (lo + hi); }
  bool valid() const { return hi >= lo; }
};

/// Identifies one reproducible noise stream. Identical (seed, stream_id)
/// pairs reproduce bit-identical draws across runs and across serial vs
/// parallel execution; distinct stream_ids give independent streams.
struct SeededStream {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  bool operator==(const SeededStream& o) const {
    return seed == o.seed && stream_id == o.stream_id;
  }
};

// stream_id layout: the high 16 bits name the use domain so parallel Monte
// Carlo over observations, reduced realizations, retries and validation
// never collides on a stream.
namespace stream_domain {
inline constexpr std::uint64_t kObservation = 0;
inline constexpr std::uint64_t kRealization = 1;
inline constexpr std::uint64_t kRetry = 2;
inline constexpr std::uint64_t kValidation = 3;
}  // namespace stream_domain

inline SeededStream substream(std::uint64_t seed, std::uint64_t domain, std::uint64_t index) {
  return SeededStream{seed, (domain << 48) | index};
}

/// Deterministic generator for a stream; mt19937_64 output is pinned by the
/// standard, and all variate transforms below use raw bits only, so streams
/// are portable across compilers.
std::mt19937_64 make_rng(const SeededStream& stream);

/// Uniform on the open interval (0,1).
inline double uniform_open(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// e^{A t}. Closed form for scalar and diagonal A, scaling-and-squaring
/// otherwise; dimensions are desk scale so either path is cheap.
Mat mat_exp(const Mat& a, double t);

/// True when every eigenvalue of A has negative real part.
bool spectrum_stable(const Mat& a);

/// Runs fn(i) for i in [0, count) on at most `threads` workers and keeps
/// result slots indexed by i, so reductions done afterwards in index order
/// are bit-stable regardless of scheduling.
void parallel_for_indexed(int count, int threads, const std::function<void(int)>& fn);

}  // namespace lsm
