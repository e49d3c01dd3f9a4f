#include "skaudit/sw_codes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "skaudit/rng.hpp"

namespace skaudit {

namespace {

constexpr std::uint64_t kNoPreimage = std::numeric_limits<std::uint64_t>::max();
constexpr double kZ99 = 2.5758293035489004;  // 99% two-sided normal quantile

void check_pair(const CodePair& code) {
  if (code.encoder.n != code.decoder.n || code.encoder.m != code.decoder.m) {
    throw std::invalid_argument("code pair has mismatched (n, m)");
  }
}

// Shared decoder construction over any per-z conditional enumerator.
template <typename Enumerate>
Decoder build_map_decoder(int n, std::uint64_t z_count, const EncoderMap& encoder,
                          Enumerate&& enumerate) {
  Decoder dec;
  dec.n = n;
  dec.m = encoder.m;
  dec.z_count = z_count;
  dec.map.assign(encoder.m * z_count, 0);
  std::vector<double> best(encoder.m);
  enumerate([&](std::uint64_t zi, double, const std::vector<double>& cond) {
    std::fill(best.begin(), best.end(), -1.0);  // any bin member beats this
    for (std::uint64_t xi = 0; xi < cond.size(); ++xi) {
      const std::uint64_t s = encoder.apply(xi);
      if (cond[xi] > best[s]) {  // strict: earliest x wins ties
        best[s] = cond[xi];
        dec.map[s * z_count + zi] = xi;
      }
    }
  });
  return dec;
}

template <typename Enumerate>
double exact_error(const CodePair& code, Enumerate&& enumerate) {
  double correct = 0.0;
  enumerate([&](std::uint64_t zi, double pz, const std::vector<double>& cond) {
    double c = 0.0;
    for (std::uint64_t s = 0; s < code.encoder.m; ++s) {
      const std::uint64_t xhat = code.decoder.decode(s, zi);
      if (code.encoder.apply(xhat) == s) c += cond[xhat];
    }
    correct += pz * c;
  });
  // clamp away the last-ulp drift so the result stays a probability
  return std::min(1.0, std::max(0.0, 1.0 - correct));
}

double grid_supremum(const std::vector<WnLevel>& dist, std::uint64_t m,
                     const std::vector<double>& alpha_grid) {
  if (alpha_grid.empty()) {
    throw std::invalid_argument("converse bound needs a nonempty alpha grid");
  }
  double best = -std::numeric_limits<double>::infinity();
  for (const double alpha : alpha_grid) {
    const double v = wn_tail_geq(dist, alpha) -
                     static_cast<double>(m) * std::exp(-alpha);
    best = std::max(best, v);
  }
  return best;
}

}  // namespace

std::uint64_t EncoderMap::apply(std::uint64_t x_index) const {
  switch (form) {
    case EncoderForm::seeded:
      return hash_bin(x_index, seed, m);
    case EncoderForm::identity:
      return x_index;
    case EncoderForm::table:
      return table[x_index];
  }
  return 0;  // unreachable
}

EncoderMap random_binning(std::uint64_t domain_size, int n, std::uint64_t m,
                          std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("random_binning: m must be >= 1");
  if (domain_size < 1) throw std::invalid_argument("random_binning: empty domain");
  EncoderMap enc;
  enc.form = EncoderForm::seeded;
  enc.n = n;
  enc.m = m;
  enc.domain_size = domain_size;
  enc.seed = seed;
  return enc;
}

EncoderMap identity_encoder(std::uint64_t domain_size, int n) {
  if (domain_size < 1) throw std::invalid_argument("identity_encoder: empty domain");
  EncoderMap enc;
  enc.form = EncoderForm::identity;
  enc.n = n;
  enc.m = domain_size;
  enc.domain_size = domain_size;
  return enc;
}

EncoderMap table_encoder(int n, std::uint64_t m, std::vector<std::uint32_t> table) {
  if (m < 1) throw std::invalid_argument("table_encoder: m must be >= 1");
  if (table.empty()) throw std::invalid_argument("table_encoder: empty table");
  if (m > (1ULL << 32)) {
    throw std::invalid_argument("table_encoder: m exceeds table entry range");
  }
  for (const std::uint32_t s : table) {
    if (s >= m) throw std::invalid_argument("table_encoder: entry out of range");
  }
  EncoderMap enc;
  enc.form = EncoderForm::table;
  enc.n = n;
  enc.m = m;
  enc.domain_size = table.size();
  enc.table = std::move(table);
  return enc;
}

Decoder map_decoder(const ProductSource& source, const EncoderMap& encoder) {
  if (encoder.domain_size != source.x_tuple_count() || encoder.n != source.n) {
    throw std::invalid_argument("map_decoder: encoder does not match source dimensions");
  }
  const std::uint64_t zc = source.z_tuple_count();
  if (encoder.m > source.materialize_threshold / std::max<std::uint64_t>(zc, 1)) {
    throw std::runtime_error("map_decoder: decoder table exceeds materialize_threshold");
  }
  return build_map_decoder(source.n, zc, encoder, [&](auto&& fn) {
    for_each_z_conditional(source, fn);
  });
}

Decoder map_decoder(const JointPMF& tuple_joint, int n, const EncoderMap& encoder) {
  if (encoder.domain_size != static_cast<std::uint64_t>(tuple_joint.x_size)) {
    throw std::invalid_argument("map_decoder: encoder does not match joint dimensions");
  }
  return build_map_decoder(n, tuple_joint.z_size, encoder, [&](auto&& fn) {
    for_each_z_conditional(tuple_joint, fn);
  });
}

CodePair repair_decoder(const CodePair& code) {
  check_pair(code);
  CodePair out = code;
  std::vector<std::uint64_t> smallest(code.encoder.m, kNoPreimage);
  for (std::uint64_t xi = 0; xi < code.encoder.domain_size; ++xi) {
    std::uint64_t& slot = smallest[code.encoder.apply(xi)];
    if (slot == kNoPreimage) slot = xi;
  }
  for (std::uint64_t s = 0; s < code.decoder.m; ++s) {
    if (smallest[s] == kNoPreimage) continue;  // unreachable key symbol
    for (std::uint64_t z = 0; z < code.decoder.z_count; ++z) {
      std::uint64_t& xhat = out.decoder.map[s * code.decoder.z_count + z];
      if (code.encoder.apply(xhat) != s) xhat = smallest[s];
    }
  }
  out.decoder.repaired = true;
  return out;
}

ErrorEstimate error_probability(const ProductSource& source, const CodePair& code) {
  check_pair(code);
  return {exact_error(code, [&](auto&& fn) { for_each_z_conditional(source, fn); }), 0.0};
}

ErrorEstimate error_probability(const JointPMF& tuple_joint, int n, const CodePair& code) {
  check_pair(code);
  (void)n;
  return {exact_error(code, [&](auto&& fn) { for_each_z_conditional(tuple_joint, fn); }), 0.0};
}

ErrorEstimate error_probability_mc(const ProductSource& source, const CodePair& code,
                                   std::uint64_t seed, std::uint64_t trials) {
  check_pair(code);
  if (trials < 1) throw std::invalid_argument("error_probability_mc: trials must be >= 1");
  const auto draws = sample(source, seed, trials);
  std::uint64_t errors = 0;
  for (const auto& pair : draws) {
    const std::uint64_t xi = tuple_pack(pair.x, source.base.x_size);
    const std::uint64_t zi = tuple_pack(pair.z, source.base.z_size);
    if (code.decoder.decode(code.encoder.apply(xi), zi) != xi) ++errors;
  }
  const double p = static_cast<double>(errors) / static_cast<double>(trials);
  const double half = kZ99 * std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
  return {p, half};
}

std::vector<double> default_alpha_grid(const SourceStats& stats, int n, int points) {
  if (points < 1) throw std::invalid_argument("default_alpha_grid: points must be >= 1");
  const double center = n * stats.h_cond;
  const double spread = 3.0 * std::sqrt(stats.sigma2) * std::sqrt(static_cast<double>(n));
  std::vector<double> grid(points);
  if (points == 1) {
    grid[0] = center;
    return grid;
  }
  for (int i = 0; i < points; ++i) {
    grid[i] = center - spread + 2.0 * spread * i / (points - 1);
  }
  return grid;
}

double converse_bound(const JointPMF& base, int n, std::uint64_t m,
                      const std::vector<double>& alpha_grid, std::uint64_t max_terms) {
  return grid_supremum(wn_distribution(base, n, max_terms), m, alpha_grid);
}

double converse_bound_mc(const JointPMF& base, int n, std::uint64_t m,
                         const std::vector<double>& alpha_grid, std::uint64_t seed,
                         std::uint64_t trials) {
  if (trials < 1) throw std::invalid_argument("converse_bound_mc: trials must be >= 1");
  const ProductSource source{base, n};
  const auto draws = sample(source, seed, trials);
  std::map<double, double> acc;
  const double unit = 1.0 / static_cast<double>(trials);
  for (const auto& pair : draws) acc[info_density(source, pair.x, pair.z)] += unit;
  std::vector<WnLevel> dist;
  dist.reserve(acc.size());
  for (const auto& [w, prob] : acc) dist.push_back({w, prob});
  return grid_supremum(dist, m, alpha_grid);
}

double second_order_rate(int n, std::uint64_t m, double h_cond) {
  if (m < 1) throw std::invalid_argument("second_order_rate: m must be >= 1");
  return (std::log(static_cast<double>(m)) - n * h_cond) / std::sqrt(static_cast<double>(n));
}

void write_code_manifest(std::ostream& out, const CodePair& code,
                         const std::string& table_path) {
  check_pair(code);
  out << "n=" << code.encoder.n << "\n";
  out << "m=" << code.encoder.m << "\n";
  switch (code.encoder.form) {
    case EncoderForm::seeded:
      out << "encoder=seeded\nseed=" << code.encoder.seed << "\n";
      break;
    case EncoderForm::identity:
      out << "encoder=identity\n";
      break;
    case EncoderForm::table: {
      if (table_path.empty()) {
        throw std::invalid_argument("write_code_manifest: table form needs table_path");
      }
      std::ofstream tf(table_path);
      if (!tf) throw std::runtime_error("cannot write table file: " + table_path);
      for (const std::uint32_t s : code.encoder.table) tf << s << "\n";
      out << "encoder=table\ntable_file=" << table_path << "\n";
      break;
    }
  }
  out << "decoder=map\n";
  out << "repaired=" << (code.decoder.repaired ? 1 : 0) << "\n";
}

CodePair read_code_manifest(std::istream& in, const ProductSource& source) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const auto need = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) {
      throw std::invalid_argument("code manifest missing key: " + key);
    }
    return it->second;
  };
  const int n = std::stoi(need("n"));
  const std::uint64_t m = std::stoull(need("m"));
  if (n != source.n) {
    throw std::invalid_argument("code manifest n does not match source");
  }
  const std::string& form = need("encoder");
  EncoderMap enc;
  if (form == "seeded") {
    enc = random_binning(source.x_tuple_count(), n, m, std::stoull(need("seed")));
  } else if (form == "identity") {
    enc = identity_encoder(source.x_tuple_count(), n);
    if (enc.m != m) throw std::invalid_argument("identity encoder m mismatch");
  } else if (form == "table") {
    std::ifstream tf(need("table_file"));
    if (!tf) throw std::invalid_argument("cannot open table file: " + need("table_file"));
    std::vector<std::uint32_t> table;
    std::uint64_t v;
    while (tf >> v) table.push_back(static_cast<std::uint32_t>(v));
    enc = table_encoder(n, m, std::move(table));
    if (enc.domain_size != source.x_tuple_count()) {
      throw std::invalid_argument("table file length does not match source domain");
    }
  } else {
    throw std::invalid_argument("unknown encoder form: " + form);
  }
  if (need("decoder") != "map") {
    throw std::invalid_argument("unknown decoder mode: " + need("decoder"));
  }
  CodePair code{enc, map_decoder(source, enc)};
  if (need("repaired") == "1") code = repair_decoder(code);
  return code;
}

}  // namespace skaudit
