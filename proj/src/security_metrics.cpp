#include "skaudit/security_metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace skaudit {

namespace {

// Compensated summation; the report sums run over up to threshold-many cells
// and are compared across independent routes at 1e-12, which plain
// accumulation cannot sustain at that length.
class Kahan {
 public:
  void add(double v) {
    const double y = v - carry_;
    const double t = sum_ + y;
    carry_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

void check_same_size(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) {
    throw std::invalid_argument("distribution vectors have different lengths");
  }
}

void check_encoder(std::uint64_t domain_size, int n, const EncoderMap& encoder) {
  if (encoder.domain_size != domain_size) {
    throw std::invalid_argument("encoder domain does not match the source");
  }
  if (encoder.n != n) {
    throw std::invalid_argument("encoder block length does not match the source");
  }
}

}  // namespace

double variational_distance(const std::vector<double>& p,
                            const std::vector<double>& q) {
  check_same_size(p, q);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += std::fabs(p[i] - q[i]);
  return 0.5 * sum;
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  check_same_size(p, q);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;  // 0 ln 0 = 0
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    sum += p[i] * std::log(p[i] / q[i]);
  }
  return sum;
}

double discrimination_advantage(const std::vector<double>& p,
                                const std::vector<double>& q) {
  check_same_size(p, q);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += std::max(p[i], q[i]);
  return 0.5 * sum;
}

KeyEveJoint key_eve_joint(const ProductSource& source, const EncoderMap& encoder) {
  check_encoder(source.x_tuple_count(), source.n, encoder);
  source.require_enumerable("key distribution");
  const std::uint64_t zc = source.z_tuple_count();
  if (encoder.m > source.materialize_threshold / zc) {
    throw std::runtime_error("key-observer table exceeds the materialization threshold");
  }
  KeyEveJoint joint;
  joint.n = source.n;
  joint.m = encoder.m;
  joint.z_count = zc;
  joint.probs.assign(encoder.m * zc, 0.0);
  for_each_z_conditional(
      source, [&](std::uint64_t zi, double pz, const std::vector<double>& cond) {
        for (std::uint64_t x = 0; x < cond.size(); ++x) {
          if (cond[x] > 0.0) {
            joint.probs[encoder.apply(x) * zc + zi] += pz * cond[x];
          }
        }
      });
  return joint;
}

KeyEveJoint key_eve_joint(const JointPMF& tuple_joint, int n,
                          const EncoderMap& encoder) {
  check_encoder(static_cast<std::uint64_t>(tuple_joint.x_size), n, encoder);
  const auto zc = static_cast<std::uint64_t>(tuple_joint.z_size);
  KeyEveJoint joint;
  joint.n = n;
  joint.m = encoder.m;
  joint.z_count = zc;
  joint.probs.assign(encoder.m * zc, 0.0);
  for (int x = 0; x < tuple_joint.x_size; ++x) {
    const std::uint64_t s = encoder.apply(static_cast<std::uint64_t>(x));
    for (std::uint64_t z = 0; z < zc; ++z) {
      joint.probs[s * zc + z] += tuple_joint.at(x, static_cast<int>(z));
    }
  }
  return joint;
}

SecurityReport security_report(const KeyEveJoint& joint, double nh_cond) {
  const std::uint64_t m = joint.m, zc = joint.z_count;
  std::vector<double> pz(zc, 0.0);
  for (std::uint64_t s = 0; s < m; ++s) {
    for (std::uint64_t z = 0; z < zc; ++z) pz[z] += joint.at(s, z);
  }
  Kahan h_key_sum, delta_sum, direct_sum;
  for (std::uint64_t z = 0; z < zc; ++z) {
    if (pz[z] <= 0.0) continue;
    const double ideal = pz[z] / static_cast<double>(m);
    const double log_ideal = std::log(ideal);
    const double log_pz = std::log(pz[z]);
    for (std::uint64_t s = 0; s < m; ++s) {
      const double p = joint.at(s, z);
      delta_sum.add(std::fabs(p - ideal));
      if (p > 0.0) {
        const double logp = std::log(p);
        h_key_sum.add(-p * (logp - log_pz));
        direct_sum.add(p * (logp - log_ideal));
      }
    }
  }
  const double h_key = h_key_sum.value();
  const double direct = direct_sum.value();
  const double delta = 0.5 * delta_sum.value();
  const double divergence = std::log(static_cast<double>(m)) - h_key;
  if (std::fabs(divergence - direct) >
      1e-9 * std::max(1.0, std::fabs(divergence))) {
    char msg[160];
    std::snprintf(msg, sizeof msg,
                  "divergence routes disagree: entropy form %.17g vs direct sum %.17g",
                  divergence, direct);
    throw std::logic_error(msg);
  }
  SecurityReport report;
  report.n = joint.n;
  report.m = m;
  report.delta_metric = delta;
  report.divergence = divergence;
  const double root_n = std::sqrt(static_cast<double>(joint.n));
  report.normalized = divergence / static_cast<double>(joint.n);
  report.root_scaled = divergence / root_n;
  report.second_order_rate =
      (std::log(static_cast<double>(m)) - nh_cond) / root_n;
  report.distinguish_prob = 0.5 * (1.0 + delta);
  return report;
}

SecurityReport security_report(const ProductSource& source,
                               const EncoderMap& encoder) {
  const KeyEveJoint joint = key_eve_joint(source, encoder);
  const double nh = static_cast<double>(source.n) * info_stats(source.base).h_cond;
  return security_report(joint, nh);
}

SecurityReport security_report(const JointPMF& tuple_joint, int n,
                               const EncoderMap& encoder) {
  const KeyEveJoint joint = key_eve_joint(tuple_joint, n, encoder);
  return security_report(joint, info_stats(tuple_joint).h_cond);
}

double brute_force_discrimination(const KeyEveJoint& joint) {
  const std::uint64_t m = joint.m, zc = joint.z_count;
  if (m > (std::uint64_t{1} << 24) / std::max<std::uint64_t>(zc, 1)) {
    throw std::runtime_error("discrimination table exceeds 2^24 cells");
  }
  std::vector<double> pz(zc, 0.0);
  for (std::uint64_t s = 0; s < m; ++s) {
    for (std::uint64_t z = 0; z < zc; ++z) pz[z] += joint.at(s, z);
  }
  Kahan sum;
  for (std::uint64_t z = 0; z < zc; ++z) {
    const double ideal = pz[z] / static_cast<double>(m);
    for (std::uint64_t s = 0; s < m; ++s) {
      sum.add(std::max(joint.at(s, z), ideal));
    }
  }
  return 0.5 * sum.value();
}

}  // namespace skaudit
