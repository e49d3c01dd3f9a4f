#include "skaudit/theory_bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "skaudit/security_metrics.hpp"

namespace skaudit {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kMaxExactDouble = 9007199254740992.0;  // 2^53

double simpson(double (*f)(double, double, double), double b, double sigma,
               double lo, double hi) {
  const double mid = 0.5 * (lo + hi);
  return (hi - lo) / 6.0 *
         (f(lo, b, sigma) + 4.0 * f(mid, b, sigma) + f(hi, b, sigma));
}

double floor_integrand(double t, double b, double sigma) {
  return (b - sigma * t) * gaussian(t).pdf;
}

double adaptive(double (*f)(double, double, double), double b, double sigma,
                double lo, double hi, double whole, double tol, int depth) {
  const double mid = 0.5 * (lo + hi);
  const double left = simpson(f, b, sigma, lo, mid);
  const double right = simpson(f, b, sigma, mid, hi);
  if (depth <= 0 || std::fabs(left + right - whole) < 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return adaptive(f, b, sigma, lo, mid, left, 0.5 * tol, depth - 1) +
         adaptive(f, b, sigma, mid, hi, right, 0.5 * tol, depth - 1);
}

// Exact binomial coefficients as doubles, C[i][j] for i <= rows.
std::vector<std::vector<double>> pascal_triangle(int rows) {
  std::vector<std::vector<double>> c(rows + 1);
  for (int i = 0; i <= rows; ++i) {
    c[i].assign(i + 1, 1.0);
    for (int j = 1; j < i; ++j) c[i][j] = c[i - 1][j - 1] + c[i - 1][j];
  }
  return c;
}

struct SymbolLevels {
  double pz = 0.0;
  std::vector<double> value;  // distinct positive conditionals, any order
  std::vector<double> count;  // multiplicity over the x alphabet
};

// Distinct positive single-letter conditional values per observer symbol.
std::vector<SymbolLevels> per_symbol_levels(const JointPMF& base) {
  std::vector<SymbolLevels> out(base.z_size);
  for (int z = 0; z < base.z_size; ++z) {
    out[z].pz = base.z_prob(z);
    if (out[z].pz <= 0.0) continue;
    std::map<double, double> seen;
    for (int x = 0; x < base.x_size; ++x) {
      const double v = base.cond(x, z);
      if (v > 0.0) seen[v] += 1.0;
    }
    for (const auto& [v, c] : seen) {
      out[z].value.push_back(v);
      out[z].count.push_back(c);
    }
  }
  return out;
}

double compositions_of(int items, int bins, const std::vector<std::vector<double>>& c) {
  if (bins == 0) return items == 0 ? 1.0 : 0.0;
  return c[items + bins - 1][bins - 1];
}

// Enumerates one symbol's composition block and recurses into the next
// symbol, accumulating the product value / log-value / exact tuple count.
struct ProfileBuilder {
  const std::vector<SymbolLevels>* symbols = nullptr;
  const std::vector<int>* active = nullptr;       // symbol indices with n > 0
  const std::vector<int>* per_symbol_n = nullptr; // copies per active symbol
  const std::vector<std::vector<double>>* pascal = nullptr;
  std::map<double, std::pair<double, double>>* cells = nullptr;  // value -> (logv, count)

  void emit(double value, double logv, double count) const {
    auto& slot = (*cells)[value];
    if (slot.second == 0.0) slot.first = logv;
    slot.second += count;
    if (slot.second > kMaxExactDouble) {
      throw std::runtime_error("conditional profile count exceeds exact double range");
    }
  }

  // Distribute `left` coordinates of symbol `sym` over its levels starting
  // at `lvl`; `mult` carries the partial multinomial C(consumed, c) product.
  void walk_levels(std::size_t ai, int lvl, int left, double mult, int consumed,
                   double value, double logv, double count) const {
    const SymbolLevels& s = (*symbols)[(*active)[ai]];
    const auto k = static_cast<int>(s.value.size());
    if (lvl == k - 1) {
      // the remainder goes to the last level
      double v = value, lg = logv;
      for (int r = 0; r < left; ++r) v *= s.value[lvl];
      lg += left * std::log(s.value[lvl]);
      const double mult_full = mult * (*pascal)[consumed + left][left];
      double cnt = count * mult_full;
      for (int r = 0; r < left; ++r) cnt *= s.count[lvl];
      if (cnt > kMaxExactDouble) {
        throw std::runtime_error("conditional profile count exceeds exact double range");
      }
      next_symbol(ai + 1, v, lg, cnt);
      return;
    }
    for (int take = 0; take <= left; ++take) {
      double v = value, lg = logv, cnt = count;
      for (int r = 0; r < take; ++r) {
        v *= s.value[lvl];
        cnt *= s.count[lvl];
      }
      lg += take * std::log(s.value[lvl]);
      walk_levels(ai, lvl + 1, left - take, mult * (*pascal)[consumed + take][take],
                  consumed + take, v, lg, cnt);
    }
  }

  void next_symbol(std::size_t ai, double value, double logv, double count) const {
    if (ai == active->size()) {
      emit(value, logv, count);
      return;
    }
    walk_levels(ai, 0, (*per_symbol_n)[ai], 1.0, 0, value, logv, count);
  }
};

// Walks all compositions of n over the positive-probability observer symbols.
void for_each_z_type(int n, const std::vector<SymbolLevels>& symbols,
                     const std::function<void(const std::vector<int>&)>& fn) {
  const auto zs = static_cast<int>(symbols.size());
  std::vector<int> type(zs, 0);
  const std::function<void(int, int)> rec = [&](int idx, int left) {
    if (idx == zs - 1) {
      if (symbols[idx].pz <= 0.0 && left > 0) return;
      type[idx] = left;
      fn(type);
      return;
    }
    const int cap = symbols[idx].pz > 0.0 ? left : 0;
    for (int take = 0; take <= cap; ++take) {
      type[idx] = take;
      rec(idx + 1, left - take);
    }
  };
  rec(0, n);
}

double pow_exact_guarded(int base, int n, double cap) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) {
    r *= base;
    if (r > cap) return std::numeric_limits<double>::infinity();
  }
  return r;
}

// Distance of the flat top-m family for one profile, in conditional terms.
double family_distance(const CondProfile& prof, std::uint64_t m) {
  const double inv = 1.0 / static_cast<double>(m);
  double remaining = static_cast<double>(m);
  double inner = 0.0, mass = 0.0;
  for (const CondLevel& lvl : prof.levels) {
    const double take = std::min(lvl.count, remaining);
    inner += take * std::fabs(lvl.value - inv);
    mass += take * lvl.value;
    remaining -= take;
    if (remaining <= 0.0) break;
  }
  if (remaining > 0.0) inner += remaining * inv;  // zero-probability cells
  return 0.5 * (inner + (1.0 - mass));
}

}  // namespace

GaussPair gaussian(double t) {
  GaussPair g;
  g.cdf = 0.5 * std::erfc(-t / std::sqrt(2.0));
  g.pdf = std::exp(-0.5 * t * t) / std::sqrt(kTwoPi);
  return g;
}

double divergence_rate_floor(double b, double sigma) {
  if (sigma < 0.0 || !std::isfinite(sigma) || !std::isfinite(b)) {
    throw std::invalid_argument("rate floor needs finite b and sigma >= 0");
  }
  if (sigma == 0.0) return std::max(b, 0.0);
  const double u = b / sigma;
  const GaussPair g = gaussian(u);
  return b * g.cdf + sigma * g.pdf;
}

double divergence_rate_floor_quadrature(double b, double sigma, double tol) {
  if (sigma < 0.0 || !std::isfinite(sigma) || !std::isfinite(b)) {
    throw std::invalid_argument("rate floor needs finite b and sigma >= 0");
  }
  if (sigma == 0.0) return std::max(b, 0.0);
  const double hi = b / sigma;
  const double lo = std::min(-14.0, hi - 10.0);
  const double whole = simpson(floor_integrand, b, sigma, lo, hi);
  return adaptive(floor_integrand, b, sigma, lo, hi, whole, tol, 40);
}

BoundReport truncated_entropy_bound(const ProductSource& source,
                                    const EncoderMap& encoder, double b) {
  const SourceStats stats = info_stats(source.base);
  const int n = source.n;
  const double root_n = std::sqrt(static_cast<double>(n));
  const double w_star = n * stats.h_cond + b * root_n;
  const auto dist = wn_distribution(source.base, n);
  double t_sum = 0.0, t_mass = 0.0;
  for (const WnLevel& lvl : dist) {
    if (lvl.w > w_star) break;  // levels are ascending
    t_sum += lvl.w * lvl.prob;
    t_mass += lvl.prob;
  }
  const double tc_mass = std::max(0.0, 1.0 - t_mass);
  const double log_m = std::log(static_cast<double>(encoder.m));
  BoundReport report;
  report.n = n;
  report.m = encoder.m;
  report.b = b;
  report.typical_mass = t_mass;
  report.entropy_bound =
      t_sum + (tc_mass > 0.0 ? tc_mass * (log_m - std::log(tc_mass)) : 0.0);
  report.key_equivocation =
      log_m - security_report(source, encoder).divergence;
  report.rate_floor = (log_m - report.entropy_bound) / root_n;
  return report;
}

ChainReport divergence_floor_chain(const ProductSource& source,
                                   const EncoderMap& encoder, double b) {
  ChainReport chain;
  chain.bound = truncated_entropy_bound(source, encoder, b);
  const KeyEveJoint joint = key_eve_joint(source, encoder);
  const double nh =
      static_cast<double>(source.n) * info_stats(source.base).h_cond;
  const SecurityReport rep = security_report(joint, nh);
  // independent direct-sum route to the divergence
  const std::uint64_t m = joint.m, zc = joint.z_count;
  std::vector<double> pz(zc, 0.0);
  for (std::uint64_t s = 0; s < m; ++s) {
    for (std::uint64_t z = 0; z < zc; ++z) pz[z] += joint.at(s, z);
  }
  double direct = 0.0;
  for (std::uint64_t z = 0; z < zc; ++z) {
    if (pz[z] <= 0.0) continue;
    const double ideal = pz[z] / static_cast<double>(m);
    for (std::uint64_t s = 0; s < m; ++s) {
      const double p = joint.at(s, z);
      if (p > 0.0) direct += p * std::log(p / ideal);
    }
  }
  chain.root_scaled = rep.root_scaled;
  chain.truncation = chain.bound.entropy_bound - chain.bound.key_equivocation;
  chain.floor_chain = chain.root_scaled - chain.bound.rate_floor;
  chain.identity_forward = rep.divergence - direct;
  chain.identity_backward = direct - rep.divergence;
  return chain;
}

std::vector<CondProfile> conditional_profiles(const JointPMF& base, int n,
                                              std::uint64_t max_terms) {
  if (n < 1) throw std::invalid_argument("block length must be positive");
  const std::vector<SymbolLevels> symbols = per_symbol_levels(base);
  const auto pascal = pascal_triangle(n + base.x_size + 1);
  // admission check: total composition terms across all type classes
  double total_terms = 0.0;
  for_each_z_type(n, symbols, [&](const std::vector<int>& type) {
    double terms = 1.0;
    for (std::size_t z = 0; z < symbols.size(); ++z) {
      if (type[z] == 0) continue;
      terms *= compositions_of(type[z], static_cast<int>(symbols[z].value.size()),
                               pascal);
    }
    total_terms += terms;
  });
  if (total_terms > static_cast<double>(max_terms)) {
    throw std::runtime_error("conditional profile enumeration exceeds max_terms");
  }
  const double x_total = pow_exact_guarded(base.x_size, n, kMaxExactDouble);
  if (!std::isfinite(x_total)) {
    throw std::runtime_error("x tuple count exceeds exact double range");
  }

  std::vector<CondProfile> out;
  for_each_z_type(n, symbols, [&](const std::vector<int>& type) {
    // class weight: multinomial(n; type) * prod pz^type
    double weight = 1.0, mult = 1.0;
    int consumed = 0;
    std::vector<int> active, counts;
    for (std::size_t z = 0; z < symbols.size(); ++z) {
      if (type[z] == 0) continue;
      active.push_back(static_cast<int>(z));
      counts.push_back(type[z]);
      consumed += type[z];
      mult *= pascal[consumed][type[z]];
      for (int r = 0; r < type[z]; ++r) weight *= symbols[z].pz;
    }
    weight *= mult;
    if (weight <= 0.0) return;

    std::map<double, std::pair<double, double>> cells;
    ProfileBuilder builder{&symbols, &active, &counts, &pascal, &cells};
    builder.next_symbol(0, 1.0, 0.0, 1.0);

    CondProfile prof;
    prof.z_weight = weight;
    double positive = 0.0;
    for (auto it = cells.rbegin(); it != cells.rend(); ++it) {
      prof.levels.push_back({it->first, it->second.first, it->second.second});
      positive += it->second.second;
    }
    prof.zero_count = std::max(0.0, x_total - positive);
    out.push_back(std::move(prof));
  });
  return out;
}

std::vector<CondProfile> conditional_profiles(const JointPMF& tuple_joint) {
  std::vector<CondProfile> out;
  for (int z = 0; z < tuple_joint.z_size; ++z) {
    const double pz = tuple_joint.z_prob(z);
    if (pz <= 0.0) continue;
    std::map<double, double> seen;
    double zeros = 0.0;
    for (int x = 0; x < tuple_joint.x_size; ++x) {
      const double v = tuple_joint.cond(x, z);
      if (v > 0.0) {
        seen[v] += 1.0;
      } else {
        zeros += 1.0;
      }
    }
    CondProfile prof;
    prof.z_weight = pz;
    prof.zero_count = zeros;
    for (auto it = seen.rbegin(); it != seen.rend(); ++it) {
      prof.levels.push_back({it->first, std::log(it->first), it->second});
    }
    out.push_back(std::move(prof));
  }
  return out;
}

DeltaCurve delta_curve(const std::vector<CondProfile>& profiles,
                       std::uint64_t x_total, std::uint64_t m_lo,
                       std::uint64_t m_hi) {
  if (m_hi == 0 || m_hi > x_total) m_hi = x_total;
  if (m_lo < 1 || m_lo > m_hi) {
    throw std::invalid_argument("invalid key-count range for the distance scan");
  }
  DeltaCurve curve;
  curve.delta = std::numeric_limits<double>::infinity();
  curve.points.reserve(m_hi - m_lo + 1);
  for (std::uint64_t m = m_lo; m <= m_hi; ++m) {
    double d = 0.0;
    for (const CondProfile& prof : profiles) {
      d += prof.z_weight * family_distance(prof, m);
    }
    curve.points.push_back({m, d});
    if (d < curve.delta) {
      curve.delta = d;
      curve.best_m = m;
    }
  }
  return curve;
}

DeltaCurve delta_exact(const JointPMF& base, int n, std::uint64_t m_lo,
                       std::uint64_t m_hi) {
  const double x_total = pow_exact_guarded(base.x_size, n, 1048576.0);
  if (!std::isfinite(x_total)) {
    throw std::runtime_error("distance scan needs |X|^n <= 2^20");
  }
  return delta_curve(conditional_profiles(base, n),
                     static_cast<std::uint64_t>(x_total), m_lo, m_hi);
}

DeltaCurve delta_exact_tuple(const JointPMF& tuple_joint, std::uint64_t m_lo,
                             std::uint64_t m_hi) {
  return delta_curve(conditional_profiles(tuple_joint),
                     static_cast<std::uint64_t>(tuple_joint.x_size), m_lo, m_hi);
}

double delta_brute(const JointPMF& tuple_joint) {
  const int xs = tuple_joint.x_size;
  if (xs > 12) {
    throw std::runtime_error("family enumeration is limited to x alphabets of size 12");
  }
  double best = std::numeric_limits<double>::infinity();
  for (int m = 1; m <= xs; ++m) {
    const double inv = 1.0 / m;
    double total = 0.0;
    for (int z = 0; z < tuple_joint.z_size; ++z) {
      const double pz = tuple_joint.z_prob(z);
      if (pz <= 0.0) continue;
      double zbest = std::numeric_limits<double>::infinity();
      for (std::uint32_t mask = 0; mask < (1u << xs); ++mask) {
        if (__builtin_popcount(mask) != m) continue;
        double d = 0.0;
        for (int x = 0; x < xs; ++x) {
          const double v = tuple_joint.cond(x, z);
          d += (mask >> x) & 1u ? std::fabs(v - inv) : v;
        }
        zbest = std::min(zbest, 0.5 * d);
      }
      total += pz * zbest;
    }
    best = std::min(best, total);
  }
  return best;
}

PartitionReport partition_report(const JointPMF& base, int n, std::uint64_t m,
                                 double b, double c1) {
  if (b < 0.0) throw std::invalid_argument("threshold offset b must be >= 0");
  const double x_total = pow_exact_guarded(base.x_size, n, 1048576.0);
  if (!std::isfinite(x_total)) {
    throw std::runtime_error("partition accounting needs |X|^n <= 2^20");
  }
  if (m < 1 || static_cast<double>(m) > x_total) {
    throw std::invalid_argument("key count must lie in [1, |X|^n]");
  }
  const SourceStats stats = info_stats(base);
  const double root_n = std::sqrt(static_cast<double>(n));
  const double hi = std::exp(b * root_n) / static_cast<double>(m);
  const double lo = std::exp(-b * root_n) / static_cast<double>(m);

  PartitionReport report;
  report.n = n;
  report.m = m;
  report.b = b;
  report.c1 = c1;
  report.exp_bound = std::exp(-b * root_n);
  if (stats.sigma2 > 0.0) {
    const double sigma = std::sqrt(stats.sigma2);
    report.band_bound = 2.0 * b / (sigma * std::sqrt(kTwoPi)) +
                        2.0 * c1 * stats.rho3 / (sigma * stats.sigma2 * root_n);
  } else {
    report.band_bound = std::numeric_limits<double>::infinity();
  }

  for (const CondProfile& prof : conditional_profiles(base, n)) {
    double above = 0.0;           // cells strictly above the upper threshold
    double remaining = static_cast<double>(m);
    for (const CondLevel& lvl : prof.levels) {
      if (lvl.value > hi) above += lvl.count;
      if (lvl.value > lo && lvl.value <= hi) {
        report.band_mass += prof.z_weight * lvl.count * lvl.value;
      }
      if (remaining > 0.0) {
        const double take = std::min(lvl.count, remaining);
        if (lvl.value <= lo) {
          report.low_family_mass += prof.z_weight * take * lvl.value;
        }
        remaining -= take;
      }
    }
    report.high_flat_mass +=
        prof.z_weight * std::min(above, static_cast<double>(m)) /
        static_cast<double>(m);
  }
  report.lower_bound =
      1.0 - (report.high_flat_mass + report.low_family_mass + report.band_mass);
  return report;
}

DistanceLowerBound distance_lower_bound(const JointPMF& base, int n, double b,
                                        double c1) {
  const DeltaCurve curve = delta_exact(base, n);
  DistanceLowerBound result;
  result.partition = partition_report(base, n, curve.best_m, b, c1);
  result.m = curve.best_m;
  result.delta = curve.delta;
  result.lower = result.partition.lower_bound;
  return result;
}

}  // namespace skaudit
