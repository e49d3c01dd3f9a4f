#pragma once

#include <cstdint>
#include <vector>

#include "skaudit/source_core.hpp"
#include "skaudit/sw_codes.hpp"

namespace skaudit {

// Total variation distance (1/2) * sum |p_i - q_i| between two equal-length
// nonnegative vectors. No normalization is applied.
double variational_distance(const std::vector<double>& p,
                            const std::vector<double>& q);

// Relative entropy sum p_i ln(p_i / q_i) in nats, with 0 ln 0 = 0. Returns
// +infinity when p places mass where q has none.
double kl_divergence(const std::vector<double>& p, const std::vector<double>& q);

// Success probability of the optimal single-observation test between p and q
// under a fair prior, evaluated by per-cell maximum selection:
// (1/2) * sum max(p_i, q_i). Disjoint supports give exactly 1.
double discrimination_advantage(const std::vector<double>& p,
                                const std::vector<double>& q);

// Joint distribution of the produced key S = encoder(X^n) together with the
// observer's tuple Z^n, stored row-major with the key as the row index.
struct KeyEveJoint {
  int n = 0;
  std::uint64_t m = 0;        // number of key values
  std::uint64_t z_count = 0;  // number of observer tuples
  std::vector<double> probs;  // probs[s * z_count + z]

  double at(std::uint64_t s, std::uint64_t z) const {
    return probs[s * z_count + z];
  }
};

// Exact key--observer joint by pushing the full tuple distribution through
// the encoder. Gated by the source materialization threshold on both the
// tuple enumeration and the m * |Z|^n output table.
KeyEveJoint key_eve_joint(const ProductSource& source, const EncoderMap& encoder);

// Same computation for an explicit (not necessarily i.i.d.) joint over
// tuples; the alphabets are the tuple index sets themselves.
KeyEveJoint key_eve_joint(const JointPMF& tuple_joint, int n,
                          const EncoderMap& encoder);

// All security figures of one key--observer joint against the ideal pair
// (uniform key independent of the observation). All divergences in nats.
struct SecurityReport {
  int n = 0;
  std::uint64_t m = 0;
  double delta_metric = 0.0;       // total variation to the ideal pair
  double divergence = 0.0;         // relative entropy to the ideal pair
  double normalized = 0.0;         // divergence / n
  double root_scaled = 0.0;        // divergence / sqrt(n)
  double second_order_rate = 0.0;  // (ln m - n h) / sqrt(n)
  double distinguish_prob = 0.0;   // optimal test success, (1 + delta) / 2
};

// Builds the report from an already-materialized key--observer joint.
// `nh_cond` is the conditional entropy H(X^n | Z^n) of the raw pair in nats
// (n times the single-letter value for i.i.d. sources). The divergence is
// computed as ln m - H(S | Z^n) and cross-checked against the direct
// cell-by-cell sum; disagreement beyond 1e-9 throws std::logic_error.
SecurityReport security_report(const KeyEveJoint& joint, double nh_cond);

SecurityReport security_report(const ProductSource& source,
                               const EncoderMap& encoder);
SecurityReport security_report(const JointPMF& tuple_joint, int n,
                               const EncoderMap& encoder);

// Independent route to the distinguishing probability: per-cell maximum
// selection over the materialized key--observer table against the ideal
// table. Gated at m * z_count <= 2^24 cells.
double brute_force_discrimination(const KeyEveJoint& joint);

}  // namespace skaudit
