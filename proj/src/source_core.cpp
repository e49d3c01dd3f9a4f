#include "skaudit/source_core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "skaudit/rng.hpp"

namespace skaudit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t pow_saturating(std::uint64_t base, int exp) {
  if (base == 0) return 0;
  std::uint64_t r = 1;
  for (int i = 0; i < exp; ++i) {
    if (r > std::numeric_limits<std::uint64_t>::max() / base) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    r *= base;
  }
  return r;
}

void finish_marginals(JointPMF& pmf) {
  pmf.x_marginal.assign(pmf.x_size, 0.0);
  pmf.z_marginal.assign(pmf.z_size, 0.0);
  for (int x = 0; x < pmf.x_size; ++x) {
    for (int z = 0; z < pmf.z_size; ++z) {
      pmf.x_marginal[x] += pmf.at(x, z);
      pmf.z_marginal[z] += pmf.at(x, z);
    }
  }
}

}  // namespace

JointPMF construct_joint(const std::vector<std::vector<double>>& matrix) {
  if (matrix.empty() || matrix.front().empty()) {
    throw std::invalid_argument("construct_joint: empty matrix");
  }
  const std::size_t cols = matrix.front().size();
  double total = 0.0;
  for (const auto& row : matrix) {
    if (row.size() != cols) {
      throw std::invalid_argument("construct_joint: ragged matrix");
    }
    for (double v : row) {
      if (!(v >= 0.0)) {  // also rejects NaN
        throw std::invalid_argument("construct_joint: negative entry");
      }
      total += v;
    }
  }
  if (std::fabs(total - 1.0) > 1e-9) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "construct_joint: total %.12g not within 1e-9 of 1", total);
    throw std::invalid_argument(buf);
  }
  JointPMF pmf;
  pmf.x_size = static_cast<int>(matrix.size());
  pmf.z_size = static_cast<int>(cols);
  pmf.probs.reserve(matrix.size() * cols);
  for (const auto& row : matrix) {
    for (double v : row) pmf.probs.push_back(v / total);
  }
  finish_marginals(pmf);
  return pmf;
}

JointPMF parse_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("cannot open matrix file: " + path);
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (!ls.eof()) {
      throw std::invalid_argument("matrix file has a non-numeric token: " + path);
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  return construct_joint(rows);
}

JointPMF load_source(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon != std::string::npos) {
    const std::string kind = spec.substr(0, colon);
    const std::string arg = spec.substr(colon + 1);
    if (kind == "bsc") {
      double p;
      try {
        std::size_t used = 0;
        p = std::stod(arg, &used);
        if (used != arg.size()) throw std::invalid_argument("");
      } catch (...) {
        throw std::invalid_argument("bsc preset needs a numeric flip probability: " + spec);
      }
      if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument("bsc flip probability out of [0,1]: " + spec);
      }
      return construct_joint({{0.5 * (1.0 - p), 0.5 * p}, {0.5 * p, 0.5 * (1.0 - p)}});
    }
    if (kind == "indep" || kind == "det") {
      long k;
      try {
        std::size_t used = 0;
        k = std::stol(arg, &used);
        if (used != arg.size()) throw std::invalid_argument("");
      } catch (...) {
        throw std::invalid_argument(kind + " preset needs an integer alphabet size: " + spec);
      }
      if (k < 1 || k > 4096) {
        throw std::invalid_argument(kind + " alphabet size out of [1,4096]: " + spec);
      }
      std::vector<std::vector<double>> m(k, std::vector<double>(k, 0.0));
      for (long i = 0; i < k; ++i) {
        for (long j = 0; j < k; ++j) {
          if (kind == "indep") {
            m[i][j] = 1.0 / (static_cast<double>(k) * static_cast<double>(k));
          } else if (i == j) {
            m[i][j] = 1.0 / static_cast<double>(k);
          }
        }
      }
      return construct_joint(m);
    }
  }
  return parse_matrix_file(spec);
}

SourceStats info_stats(const JointPMF& pmf) {
  double h = 0.0;
  for (int x = 0; x < pmf.x_size; ++x) {
    for (int z = 0; z < pmf.z_size; ++z) {
      const double p = pmf.at(x, z);
      if (p <= 0.0) continue;  // zero-mass cells contribute 0 to every moment
      h += p * -std::log(pmf.cond(x, z));
    }
  }
  double s2 = 0.0, r3 = 0.0;
  for (int x = 0; x < pmf.x_size; ++x) {
    for (int z = 0; z < pmf.z_size; ++z) {
      const double p = pmf.at(x, z);
      if (p <= 0.0) continue;
      const double d = -std::log(pmf.cond(x, z)) - h;
      s2 += p * d * d;
      r3 += p * std::fabs(d) * d * d;
    }
  }
  SourceStats st;
  st.h_cond = h;
  st.sigma2 = s2;
  st.rho3 = r3;
  st.compression_limit = h;
  return st;
}

bool constant_info_density(const JointPMF& pmf) {
  bool have = false;
  double w0 = 0.0;
  for (int x = 0; x < pmf.x_size; ++x) {
    for (int z = 0; z < pmf.z_size; ++z) {
      if (pmf.at(x, z) <= 0.0) continue;
      const double w = -std::log(pmf.cond(x, z));
      if (!have) {
        w0 = w;
        have = true;
      } else if (std::fabs(w - w0) > 1e-12 * std::max(1.0, std::fabs(w0))) {
        return false;
      }
    }
  }
  return true;
}

std::uint64_t ProductSource::x_tuple_count() const {
  return pow_saturating(static_cast<std::uint64_t>(base.x_size), n);
}

std::uint64_t ProductSource::z_tuple_count() const {
  return pow_saturating(static_cast<std::uint64_t>(base.z_size), n);
}

bool ProductSource::enumerable() const {
  const std::uint64_t xc = x_tuple_count();
  const std::uint64_t zc = z_tuple_count();
  if (xc > materialize_threshold || zc > materialize_threshold) return false;
  if (xc != 0 && zc > materialize_threshold / xc) return false;
  return true;
}

void ProductSource::require_enumerable(const std::string& what) const {
  if (!enumerable()) {
    throw std::runtime_error(what + ": |X|^n * |Z|^n exceeds materialize_threshold (" +
                             std::to_string(materialize_threshold) + ") at n=" + std::to_string(n));
  }
}

double ProductSource::joint_prob(const std::vector<int>& x, const std::vector<int>& z) const {
  if (static_cast<int>(x.size()) != n || static_cast<int>(z.size()) != n) {
    throw std::invalid_argument("joint_prob: tuple length mismatch");
  }
  double p = 1.0;
  for (int i = 0; i < n; ++i) p *= base.at(x[i], z[i]);
  return p;
}

double ProductSource::z_prob(const std::vector<int>& z) const {
  if (static_cast<int>(z.size()) != n) {
    throw std::invalid_argument("z_prob: tuple length mismatch");
  }
  double p = 1.0;
  for (int i = 0; i < n; ++i) p *= base.z_prob(z[i]);
  return p;
}

std::uint64_t tuple_pack(const std::vector<int>& digits, int base) {
  std::uint64_t index = 0;
  std::uint64_t stride = 1;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    index += static_cast<std::uint64_t>(digits[i]) * stride;
    stride *= static_cast<std::uint64_t>(base);
  }
  return index;
}

std::vector<int> tuple_unpack(std::uint64_t index, int base, int n) {
  std::vector<int> digits(n);
  for (int i = 0; i < n; ++i) {
    digits[i] = static_cast<int>(index % static_cast<std::uint64_t>(base));
    index /= static_cast<std::uint64_t>(base);
  }
  return digits;
}

double info_density(const ProductSource& source, const std::vector<int>& x,
                    const std::vector<int>& z) {
  if (static_cast<int>(x.size()) != source.n || static_cast<int>(z.size()) != source.n) {
    throw std::invalid_argument("info_density: tuple length mismatch");
  }
  double w = 0.0;
  for (int i = 0; i < source.n; ++i) {
    if (source.base.z_prob(z[i]) <= 0.0) {
      throw std::invalid_argument("info_density: coordinate with P_Z(z)=0");
    }
    const double c = source.base.cond(x[i], z[i]);
    if (c <= 0.0) return kInf;
    w += -std::log(c);
  }
  return w;
}

std::vector<SamplePair> sample(const ProductSource& source, std::uint64_t seed,
                               std::uint64_t count) {
  if (count < 1) throw std::invalid_argument("sample: count must be >= 1");
  const int cells = source.base.x_size * source.base.z_size;
  std::vector<double> cdf(cells);
  double acc = 0.0;
  for (int i = 0; i < cells; ++i) {
    acc += source.base.probs[i];
    cdf[i] = acc;
  }
  int last_nonzero = 0;
  for (int i = 0; i < cells; ++i) {
    if (source.base.probs[i] > 0.0) last_nonzero = i;
  }
  Rng rng(seed);
  std::vector<SamplePair> out(count);
  for (std::uint64_t s = 0; s < count; ++s) {
    out[s].x.resize(source.n);
    out[s].z.resize(source.n);
    for (int i = 0; i < source.n; ++i) {
      const double u = rng.next_double();
      const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      const int cell = it == cdf.end() ? last_nonzero : static_cast<int>(it - cdf.begin());
      out[s].x[i] = cell / source.base.z_size;
      out[s].z[i] = cell % source.base.z_size;
    }
  }
  return out;
}

std::vector<WnLevel> single_letter_levels(const JointPMF& pmf) {
  std::map<double, double> acc;  // exact-double keying merges equal values
  for (int x = 0; x < pmf.x_size; ++x) {
    for (int z = 0; z < pmf.z_size; ++z) {
      const double p = pmf.at(x, z);
      if (p <= 0.0) continue;
      acc[-std::log(pmf.cond(x, z))] += p;
    }
  }
  std::vector<WnLevel> levels;
  levels.reserve(acc.size());
  for (const auto& [w, prob] : acc) levels.push_back({w, prob});
  return levels;
}

std::vector<WnLevel> wn_distribution(const JointPMF& pmf, int n, std::uint64_t max_terms) {
  if (n < 1) throw std::invalid_argument("wn_distribution: n must be >= 1");
  const std::vector<WnLevel> single = single_letter_levels(pmf);
  const int k = static_cast<int>(single.size());
  // Number of compositions of n into k nonnegative parts: C(n+k-1, k-1).
  double comps = 1.0;
  for (int i = 1; i < k; ++i) comps *= static_cast<double>(n + i) / i;
  if (comps > static_cast<double>(max_terms)) {
    throw std::runtime_error("wn_distribution: composition count exceeds max_terms");
  }
  std::vector<double> log_p(k), lg(n + 2);
  for (int i = 0; i < k; ++i) log_p[i] = std::log(single[i].prob);
  for (int i = 0; i <= n + 1; ++i) lg[i] = std::lgamma(static_cast<double>(i) + 1.0);

  std::map<double, double> acc;
  std::vector<int> counts(k, 0);
  // Recursive composition walk; log-space multinomial weight per leaf.
  auto walk = [&](auto&& self, int level, int remaining) -> void {
    if (level == k - 1) {
      counts[level] = remaining;
      double logw = lg[n];
      double w = 0.0;
      for (int i = 0; i < k; ++i) {
        logw += counts[i] * log_p[i] - lg[counts[i]];
        w += counts[i] * single[i].w;
      }
      acc[w] += std::exp(logw);
      return;
    }
    for (int c = 0; c <= remaining; ++c) {
      counts[level] = c;
      self(self, level + 1, remaining - c);
    }
  };
  walk(walk, 0, n);

  std::vector<WnLevel> dist;
  dist.reserve(acc.size());
  for (const auto& [w, prob] : acc) dist.push_back({w, prob});
  return dist;
}

double wn_tail_geq(const std::vector<WnLevel>& dist, double alpha) {
  double tail = 0.0;
  for (const auto& lvl : dist) {
    if (lvl.w >= alpha) tail += lvl.prob;
  }
  return tail;
}

void for_each_z_conditional(
    const ProductSource& source,
    const std::function<void(std::uint64_t, double, const std::vector<double>&)>& fn) {
  source.require_enumerable("for_each_z_conditional");
  const int X = source.base.x_size;
  const std::uint64_t xc = source.x_tuple_count();
  const std::uint64_t zc = source.z_tuple_count();
  std::vector<double> cond(xc);
  std::vector<int> zdig(source.n, 0);
  for (std::uint64_t zi = 0; zi < zc; ++zi) {
    double pz = 1.0;
    for (int d = 0; d < source.n; ++d) pz *= source.base.z_prob(zdig[d]);
    if (pz > 0.0) {
      // In-place tensor build of the conditional vector, least-significant
      // digit first; the chi = 0 block is written last so nothing is clobbered.
      cond[0] = 1.0;
      std::uint64_t block = 1;
      for (int d = 0; d < source.n; ++d) {
        for (int chi = X - 1; chi >= 0; --chi) {
          const double c = source.base.cond(chi, zdig[d]);
          double* dst = cond.data() + static_cast<std::uint64_t>(chi) * block;
          for (std::uint64_t i = 0; i < block; ++i) dst[i] = cond[i] * c;
        }
        block *= static_cast<std::uint64_t>(X);
      }
      fn(zi, pz, cond);
    }
    // odometer increment, little-endian
    for (int d = 0; d < source.n; ++d) {
      if (++zdig[d] < source.base.z_size) break;
      zdig[d] = 0;
    }
  }
}

void for_each_z_conditional(
    const JointPMF& tuple_joint,
    const std::function<void(std::uint64_t, double, const std::vector<double>&)>& fn) {
  std::vector<double> cond(tuple_joint.x_size);
  for (int z = 0; z < tuple_joint.z_size; ++z) {
    const double pz = tuple_joint.z_prob(z);
    if (pz <= 0.0) continue;
    for (int x = 0; x < tuple_joint.x_size; ++x) cond[x] = tuple_joint.cond(x, z);
    fn(static_cast<std::uint64_t>(z), pz, cond);
  }
}

}  // namespace skaudit
