#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace diagest {

/// Distribution of the random probe vectors fed to the matvec oracle.
enum class ProbeDistribution { Rademacher, Gaussian };

inline const char* to_string(ProbeDistribution dist) {
  return dist == ProbeDistribution::Rademacher ? "rademacher" : "gaussian";
}

namespace detail {

/// splitmix64 finalizer; used both for seed expansion and key mixing.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct SplitMix64 {
  std::uint64_t state;
  std::uint64_t next() {
    state += 0x9E3779B97F4A7C15ULL;
    return mix64(state);
  }
};

/// xoshiro256++ (Blackman & Vigna). Small state, fast, and seedable from a
/// single 64-bit key via splitmix64, which is exactly what the per-probe
/// keying scheme below needs.
class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(std::uint64_t seed) {
    SplitMix64 sm{seed};
    for (auto& w : s_) w = sm.next();
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform double in (0, 1]; never returns 0 so log() is always safe.
  double next_unit() { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

/// Collapses (master_seed, trial_index, probe_index) into one generator key.
/// Every probe gets its own generator, so probe k of any substream can be
/// reproduced without replaying the k-1 probes before it.
inline std::uint64_t probe_key(std::uint64_t master_seed, std::uint64_t trial_index,
                               std::uint64_t probe_index) {
  std::uint64_t h = mix64(master_seed + 0x9E3779B97F4A7C15ULL);
  h = mix64(h ^ (trial_index + 0x632BE59BD9B4E019ULL));
  h = mix64(h ^ (probe_index + 0xC2B2AE3D27D4EB4FULL));
  return h;
}

inline void fill_rademacher(Xoshiro256pp& gen, Eigen::Ref<Eigen::VectorXd> v) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v[i] = (gen.next() >> 63) ? -1.0 : 1.0;
}

/// Box-Muller transform. Kept explicit (rather than std::normal_distribution)
/// so the bit stream is fixed by this code alone, not the standard library.
inline void fill_gaussian(Xoshiro256pp& gen, Eigen::Ref<Eigen::VectorXd> v) {
  const double two_pi = 2.0 * std::numbers::pi;
  Eigen::Index i = 0;
  while (i + 1 < v.size()) {
    const double r = std::sqrt(-2.0 * std::log(gen.next_unit()));
    const double theta = two_pi * gen.next_unit();
    v[i++] = r * std::cos(theta);
    v[i++] = r * std::sin(theta);
  }
  if (i < v.size()) {
    const double r = std::sqrt(-2.0 * std::log(gen.next_unit()));
    v[i] = r * std::cos(two_pi * gen.next_unit());
  }
}

}  // namespace detail

/// Deterministic source of probe vectors. A stream is identified by
/// (master_seed, trial_index); its k-th probe is a pure function of
/// (master_seed, trial_index, k), so distinct trials may be generated
/// concurrently and still reproduce bit-identically regardless of thread
/// schedule. A stream instance itself is single-consumer: next_probe()
/// advances an internal cursor.
class ProbeStream {
 public:
  ProbeStream(Eigen::Index n, ProbeDistribution dist, std::uint64_t master_seed,
              std::uint64_t trial_index = 0)
      : n_(n), dist_(dist), master_seed_(master_seed), trial_index_(trial_index) {
    if (n < 1) throw std::invalid_argument("ProbeStream: dimension must be >= 1");
  }

  Eigen::Index size() const { return n_; }
  ProbeDistribution dist() const { return dist_; }
  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t trial_index() const { return trial_index_; }
  std::uint64_t cursor() const { return next_k_; }

  /// Next probe using the stream's own distribution.
  Eigen::VectorXd next_probe() { return next_probe_as(dist_); }

  /// Next probe with an explicit distribution. Mixed-phase algorithms
  /// (a Rademacher sketch followed by probes of the caller's choice) draw
  /// both phases from one stream this way; the cursor keeps the phases on
  /// disjoint keys.
  Eigen::VectorXd next_probe_as(ProbeDistribution dist) {
    detail::Xoshiro256pp gen(detail::probe_key(master_seed_, trial_index_, next_k_++));
    Eigen::VectorXd v(n_);
    if (dist == ProbeDistribution::Rademacher)
      detail::fill_rademacher(gen, v);
    else
      detail::fill_gaussian(gen, v);
    return v;
  }

 private:
  Eigen::Index n_;
  ProbeDistribution dist_;
  std::uint64_t master_seed_;
  std::uint64_t trial_index_;
  std::uint64_t next_k_ = 0;
};

/// Draws `count` probes into the columns of an n-by-count matrix.
inline Eigen::MatrixXd probe_matrix(ProbeStream& stream, Eigen::Index count) {
  if (count < 0) throw std::invalid_argument("probe_matrix: count must be >= 0");
  Eigen::MatrixXd P(stream.size(), count);
  for (Eigen::Index k = 0; k < count; ++k) P.col(k) = stream.next_probe();
  return P;
}

inline Eigen::MatrixXd probe_matrix(ProbeStream& stream, Eigen::Index count,
                                    ProbeDistribution dist) {
  if (count < 0) throw std::invalid_argument("probe_matrix: count must be >= 0");
  Eigen::MatrixXd P(stream.size(), count);
  for (Eigen::Index k = 0; k < count; ++k) P.col(k) = stream.next_probe_as(dist);
  return P;
}

}  // namespace diagest
