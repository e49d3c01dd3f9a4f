#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace skaudit {

inline constexpr std::uint64_t kDefaultMaterializeThreshold = 1ULL << 28;

// Joint probability mass function of a single-letter pair (X, Z), stored
// row-major with x as the row index. All information quantities downstream
// are in nats.
struct JointPMF {
  int x_size = 0;
  int z_size = 0;
  std::vector<double> probs;       // probs[x * z_size + z]
  std::vector<double> x_marginal;  // cached, filled by construct_joint
  std::vector<double> z_marginal;  // cached, filled by construct_joint

  double at(int x, int z) const {
    return probs[static_cast<std::size_t>(x) * z_size + z];
  }
  double x_prob(int x) const { return x_marginal[x]; }
  double z_prob(int z) const { return z_marginal[z]; }
  // P(x|z); caller must ensure z_prob(z) > 0.
  double cond(int x, int z) const { return at(x, z) / z_marginal[z]; }
};

// Validates and normalizes a matrix (rows = x, cols = z) into a JointPMF.
// Rejects negative entries, empty input, and totals further than 1e-9 from 1;
// accepted input is renormalized so the stored total is 1 to machine accuracy.
JointPMF construct_joint(const std::vector<std::vector<double>>& matrix);

// Reads a whitespace-separated matrix file; '#' starts a comment.
JointPMF parse_matrix_file(const std::string& path);

// Resolves "bsc:<p>", "indep:<k>", "det:<k>", or a matrix file path.
JointPMF load_source(const std::string& spec);

// Single-letter information-density moments, all in nats.
//   h_cond = H(X|Z) = E[-ln P(X|Z)]
//   sigma2 = Var[-ln P(X|Z)]
//   rho3   = E[| -ln P(X|Z) - h_cond |^3]   (third absolute central moment)
struct SourceStats {
  double h_cond = 0.0;
  double sigma2 = 0.0;
  double rho3 = 0.0;
  double compression_limit = 0.0;  // equals h_cond
};
SourceStats info_stats(const JointPMF& pmf);

// Direct support scan: true iff -ln P(x|z) takes a single value on the
// support (equivalently sigma2 == 0). Relative tolerance 1e-12 on the values.
bool constant_info_density(const JointPMF& pmf);

// i.i.d. n-fold extension of a single-letter joint. Evaluation of any single
// tuple is exact for arbitrary n; full enumeration is gated by
// materialize_threshold on |X|^n * |Z|^n.
struct ProductSource {
  JointPMF base;
  int n = 1;
  std::uint64_t materialize_threshold = kDefaultMaterializeThreshold;

  std::uint64_t x_tuple_count() const;  // |X|^n, saturated at 2^64-1
  std::uint64_t z_tuple_count() const;  // |Z|^n, saturated
  bool enumerable() const;
  // Throws std::runtime_error naming `what` when enumeration is infeasible.
  void require_enumerable(const std::string& what) const;

  double joint_prob(const std::vector<int>& x, const std::vector<int>& z) const;
  double z_prob(const std::vector<int>& z) const;
};

// Mixed-radix tuple index codec, little-endian: coordinate 0 is the least
// significant digit. index = sum_i digit[i] * base^i. This layout is part of
// the CSV/manifest reproducibility contract.
std::uint64_t tuple_pack(const std::vector<int>& digits, int base);
std::vector<int> tuple_unpack(std::uint64_t index, int base, int n);

// W_n = sum_i -ln P(X|Z)(x_i|z_i) in nats; +infinity when some conditional is
// zero. Throws std::invalid_argument if a coordinate has P_Z(z_i) = 0 or the
// tuple lengths do not match source.n.
double info_density(const ProductSource& source, const std::vector<int>& x,
                    const std::vector<int>& z);

struct SamplePair {
  std::vector<int> x, z;
};

// Deterministic i.i.d. sampling: mt19937_64 seeded with `seed`, one canonical
// double per coordinate, inverse-CDF over single-letter cells in row-major
// (x, z) order.
std::vector<SamplePair> sample(const ProductSource& source, std::uint64_t seed,
                               std::uint64_t count);

// One atom of a discrete information-density distribution.
struct WnLevel {
  double w = 0.0;     // value in nats
  double prob = 0.0;  // probability mass
};

// Distinct single-letter values of -ln P(X|Z) with their masses, ascending
// in w. Cells with zero joint mass carry no probability and are skipped.
std::vector<WnLevel> single_letter_levels(const JointPMF& pmf);

// Exact distribution of W_n via composition enumeration over the single-letter
// levels: with k distinct values this costs C(n+k-1, k-1) terms, far below
// full |X|^n * |Z|^n enumeration. Multinomial weights are computed through
// lgamma in log space. Throws std::runtime_error when the composition count
// would exceed max_terms.
std::vector<WnLevel> wn_distribution(const JointPMF& pmf, int n,
                                     std::uint64_t max_terms = 5'000'000);

// Pr{W >= alpha} for a distribution returned by wn_distribution.
double wn_tail_geq(const std::vector<WnLevel>& dist, double alpha);

// Enumerates z-tuples with positive probability: calls fn(z_index, pz, cond)
// where cond[x_index] = P(x^n | z^n), for every z^n with P(z^n) > 0.
// The conditional buffer is reused between calls. Requires enumerability.
void for_each_z_conditional(
    const ProductSource& source,
    const std::function<void(std::uint64_t, double, const std::vector<double>&)>& fn);

// Same contract for an explicit joint over tuples (alphabets are the tuple
// index sets themselves).
void for_each_z_conditional(
    const JointPMF& tuple_joint,
    const std::function<void(std::uint64_t, double, const std::vector<double>&)>& fn);

}  // namespace skaudit
