#pragma once

#include <cstdint>
#include <vector>

#include "skaudit/source_core.hpp"
#include "skaudit/sw_codes.hpp"

namespace skaudit {

struct GaussPair {
  double cdf = 0.0;  // standard normal distribution function at t
  double pdf = 0.0;  // standard normal density at t
};
GaussPair gaussian(double t);

// Asymptotic floor for the root-n-scaled divergence at second-order rate b:
//   b * G(b/sigma) + sigma * g(b/sigma)
// which equals E[max(b - sigma*T, 0)] for standard normal T. The sigma -> 0
// limit max(b, 0) is returned when sigma == 0.
double divergence_rate_floor(double b, double sigma);

// Independent evaluation of the same quantity by adaptive Simpson quadrature
// of the integrand (b - sigma*t)^+ phi(t).
double divergence_rate_floor_quadrature(double b, double sigma,
                                        double tol = 1e-12);

// Everything derived from truncating the information-density distribution at
// n*h + b*sqrt(n) for one concrete code. All entropies in nats.
struct BoundReport {
  int n = 0;
  std::uint64_t m = 0;
  double b = 0.0;
  double typical_mass = 0.0;      // probability of the kept region
  double entropy_bound = 0.0;     // upper bound on the key equivocation
  double key_equivocation = 0.0;  // exact H(key | observer tuple)
  double rate_floor = 0.0;        // implied lower bound on divergence/sqrt(n)
};
BoundReport truncated_entropy_bound(const ProductSource& source,
                                    const EncoderMap& encoder, double b);

// Residual slacks of every inequality linking the truncated-entropy bound to
// the root-n divergence. Each residual is >= 0 up to floating-point noise
// when the implementation is sound.
struct ChainReport {
  BoundReport bound;
  double root_scaled = 0.0;        // divergence / sqrt(n), exact
  double truncation = 0.0;         // entropy_bound - key_equivocation
  double floor_chain = 0.0;        // root_scaled - rate_floor
  double identity_forward = 0.0;   // entropy-route D minus direct-sum D
  double identity_backward = 0.0;  // direct-sum D minus entropy-route D
};
ChainReport divergence_floor_chain(const ProductSource& source,
                                   const EncoderMap& encoder, double b);

// One distinct positive value of the conditional P(x-tuple | z-tuple), with
// the exact number of x-tuples attaining it. Counts are exact integers held
// in doubles (guarded below 2^53).
struct CondLevel {
  double value = 0.0;      // conditional probability, by direct multiplication
  double log_value = 0.0;  // sum of logs, for diagnostics
  double count = 0.0;      // number of x-tuples at this value
};

// Conditional profile of one observer tuple (or one class of tuples sharing
// a profile): levels sorted descending by value.
struct CondProfile {
  double z_weight = 0.0;   // total probability of the tuples in this class
  double zero_count = 0.0; // x-tuples with zero conditional probability
  std::vector<CondLevel> levels;
};

// Profiles of the i.i.d. n-fold extension, grouped by observer type class;
// cost is driven by per-symbol composition counts, not |X|^n * |Z|^n.
// Throws std::runtime_error past max_terms total compositions or when a
// count would leave exact double range.
std::vector<CondProfile> conditional_profiles(const JointPMF& base, int n,
                                              std::uint64_t max_terms = 5'000'000);

// Profiles of an explicit joint over tuples, one per positive-probability z.
std::vector<CondProfile> conditional_profiles(const JointPMF& tuple_joint);

struct DeltaPoint {
  std::uint64_t m = 0;
  double distance = 0.0;  // best achievable distance at this key count
};

struct DeltaCurve {
  std::vector<DeltaPoint> points;  // ascending in m
  std::uint64_t best_m = 0;
  double delta = 0.0;  // minimum of distance over the scanned range
};

// Best achievable total variation between the true pair distribution and a
// flat m-cell-per-observer idealization, minimized over the family choice
// (top-m cells by conditional mass per observer tuple, which is optimal) and
// then over m in [m_lo, m_hi]. m_hi == 0 means the full range up to the
// number of x-tuples.
DeltaCurve delta_curve(const std::vector<CondProfile>& profiles,
                       std::uint64_t x_total, std::uint64_t m_lo = 1,
                       std::uint64_t m_hi = 0);

// Convenience wrappers building the profiles first. The i.i.d. form is
// guarded at |X|^n <= 2^20.
DeltaCurve delta_exact(const JointPMF& base, int n, std::uint64_t m_lo = 1,
                       std::uint64_t m_hi = 0);
DeltaCurve delta_exact_tuple(const JointPMF& tuple_joint,
                             std::uint64_t m_lo = 1, std::uint64_t m_hi = 0);

// Certification route: enumerates every cell family (all m-subsets of the
// x alphabet, independently per observer symbol) on an explicit tuple joint.
// Guarded at x_size <= 12.
double delta_brute(const JointPMF& tuple_joint);

// Mass accounting for the three-way split of the cells by conditional
// probability against e^{+-b*sqrt(n)} / m, evaluated at the flat top-m
// family. Region masses:
//   high_flat_mass  - flat-family measure of cells above e^{ b√n}/m (strict)
//   low_family_mass - true measure of in-family cells at or below e^{-b√n}/m
//   band_mass       - true measure of cells strictly between the thresholds
//                     (upper threshold inclusive)
// and their guarantees: both extreme regions stay below exp_bound = e^{-b√n};
// the band stays below band_bound = 2b/(sigma*sqrt(2*pi)) +
// 2*c1*(rho/sigma)^3/sqrt(n), reported as +infinity when sigma == 0.
struct PartitionReport {
  int n = 0;
  std::uint64_t m = 0;
  double b = 0.0;
  double c1 = 0.0;
  double high_flat_mass = 0.0;
  double low_family_mass = 0.0;
  double band_mass = 0.0;
  double exp_bound = 0.0;
  double band_bound = 0.0;
  double lower_bound = 0.0;  // 1 - (sum of the three region masses)
};
PartitionReport partition_report(const JointPMF& base, int n, std::uint64_t m,
                                 double b, double c1 = 0.4748);

// The partition evaluated at the distance-minimizing key count, giving a
// certified lower bound on the best achievable distance at block length n.
struct DistanceLowerBound {
  PartitionReport partition;
  std::uint64_t m = 0;    // distance-minimizing key count
  double delta = 0.0;     // exact minimum distance
  double lower = 0.0;     // 1 - region masses at that key count
};
DistanceLowerBound distance_lower_bound(const JointPMF& base, int n, double b,
                                        double c1 = 0.4748);

}  // namespace skaudit
