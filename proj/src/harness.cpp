#include "skaudit/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "skaudit/rng.hpp"
#include "skaudit/security_metrics.hpp"
#include "skaudit/sw_codes.hpp"
#include "skaudit/theory_bounds.hpp"

namespace skaudit {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

long long parse_ll(const std::string& text) {
  const std::string t = trim(text);
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(t, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("not an integer: '" + text + "'");
  }
  if (used != t.size()) throw std::invalid_argument("not an integer: '" + text + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& text) {
  const std::string t = trim(text);
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(t, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("not a nonnegative integer: '" + text + "'");
  }
  if (used != t.size() || t.find('-') != std::string::npos) {
    throw std::invalid_argument("not a nonnegative integer: '" + text + "'");
  }
  return v;
}

double parse_f64(const std::string& text) {
  const std::string t = trim(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("not a number: '" + text + "'");
  }
  if (used != t.size()) throw std::invalid_argument("not a number: '" + text + "'");
  return v;
}

std::string g12(double v) { return format_g(v, 12); }

std::string rate_to_string(const RateSpec& rate) {
  switch (rate.kind) {
    case RateSpec::Kind::fixed:
      return "fixed:" + std::to_string(rate.fixed);
    case RateSpec::Kind::margin:
      return "margin:" + g12(rate.margin);
    case RateSpec::Kind::list: {
      std::string s = "list:";
      for (std::size_t i = 0; i < rate.list.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(rate.list[i]);
      }
      return s;
    }
  }
  return "";
}

// Runs fn(0..count-1) on a small worker pool. The first exception thrown by
// any worker is rethrown on the calling thread after the pool drains.
void run_parallel(std::size_t count, int threads_requested,
                  const std::function<void(std::size_t)>& fn) {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  std::size_t t = threads_requested > 0 ? static_cast<std::size_t>(threads_requested)
                                        : static_cast<std::size_t>(hw);
  if (const char* env = std::getenv("SKAUDIT_THREADS")) {
    try {
      const std::uint64_t cap = parse_u64(env);
      if (cap >= 1 && cap < t) t = cap;
    } catch (const std::exception&) {
      // unparsable environment cap is ignored
    }
  }
  if (t > count) t = count;
  if (t <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(t);
  for (std::size_t w = 0; w < t; ++w) {
    pool.emplace_back([&]() {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string iso_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

std::string join_u64(const std::vector<std::uint64_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::string join_int(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::string join_f64(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += g12(v[i]);
  }
  return s;
}

std::vector<std::uint64_t> config_seeds(const ExperimentConfig& cfg) {
  std::vector<std::uint64_t> seeds(cfg.seeds);
  for (int i = 0; i < cfg.seeds; ++i) seeds[i] = cfg.seed0 + static_cast<std::uint64_t>(i);
  return seeds;
}

// Whether exact evaluation at (n, m) fits under the materialization budget.
bool feasible_code(const ProductSource& src, std::uint64_t m) {
  if (!src.enumerable()) return false;
  const std::uint64_t zc = src.z_tuple_count();
  return m <= src.materialize_threshold / zc;
}

struct CsvFile {
  std::string name;
  std::string content;
};

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

constexpr const char* kSkipped = "skipped=threshold";

}  // namespace

RateSpec parse_rate(const std::string& text) {
  const auto pos = text.find(':');
  if (pos == std::string::npos) {
    throw std::invalid_argument("rate must be fixed:<m>, margin:<nats>, or list:<m,...>");
  }
  const std::string kind = trim(text.substr(0, pos));
  const std::string arg = text.substr(pos + 1);
  RateSpec rate;
  if (kind == "fixed") {
    rate.kind = RateSpec::Kind::fixed;
    rate.fixed = parse_u64(arg);
    if (rate.fixed < 1) throw std::invalid_argument("fixed rate needs m >= 1");
  } else if (kind == "margin") {
    rate.kind = RateSpec::Kind::margin;
    rate.margin = parse_f64(arg);
  } else if (kind == "list") {
    rate.kind = RateSpec::Kind::list;
    for (const auto& tok : split(arg, ',')) {
      const std::uint64_t m = parse_u64(tok);
      if (m < 1) throw std::invalid_argument("rate list entries must be >= 1");
      rate.list.push_back(m);
    }
    if (rate.list.empty()) throw std::invalid_argument("rate list is empty");
  } else {
    throw std::invalid_argument("unknown rate kind '" + kind + "'");
  }
  return rate;
}

std::vector<std::uint64_t> rate_key_counts(const RateSpec& rate, int n,
                                           double h_cond) {
  switch (rate.kind) {
    case RateSpec::Kind::fixed:
      return {rate.fixed};
    case RateSpec::Kind::list:
      return rate.list;
    case RateSpec::Kind::margin: {
      const double target = std::exp(n * (h_cond + rate.margin));
      double m = std::ceil(target);
      if (m < 1.0) m = 1.0;
      if (m > 9.007199254740992e15) {
        throw std::runtime_error("margin rate overflows the exact key-count range");
      }
      return {static_cast<std::uint64_t>(m)};
    }
  }
  return {};
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (const auto& tok : split(text, ',')) {
    const auto dots = tok.find("..");
    if (dots != std::string::npos) {
      const long long lo = parse_ll(tok.substr(0, dots));
      const long long hi = parse_ll(tok.substr(dots + 2));
      if (lo > hi) throw std::invalid_argument("descending range '" + tok + "'");
      for (long long v = lo; v <= hi; ++v) out.push_back(static_cast<int>(v));
    } else {
      out.push_back(static_cast<int>(parse_ll(tok)));
    }
  }
  if (out.empty()) throw std::invalid_argument("empty integer list");
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& tok : split(text, ',')) out.push_back(parse_f64(tok));
  if (out.empty()) throw std::invalid_argument("empty number list");
  return out;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file '" + path + "'");
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  " is not key=value: '" + line + "'");
    }
    apply_override(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

void apply_override(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value) {
  if (key == "source") {
    if (value.empty()) throw std::invalid_argument("source must not be empty");
    cfg.source = value;
  } else if (key == "n") {
    cfg.n_values = parse_int_list(value);
    for (const int n : cfg.n_values) {
      if (n < 1) throw std::invalid_argument("block lengths must be >= 1");
    }
  } else if (key == "rate") {
    cfg.rate = parse_rate(value);
  } else if (key == "seeds") {
    const long long v = parse_ll(value);
    if (v < 1 || v > 1'000'000) throw std::invalid_argument("seeds must be in [1, 1e6]");
    cfg.seeds = static_cast<int>(v);
  } else if (key == "seed0") {
    cfg.seed0 = parse_u64(value);
  } else if (key == "b") {
    cfg.b_values = parse_double_list(value);
    for (const double b : cfg.b_values) {
      if (b < 0.0) throw std::invalid_argument("b values must be >= 0");
    }
  } else if (key == "mode") {
    if (value != "exact" && value != "mc") {
      throw std::invalid_argument("mode must be 'exact' or 'mc'");
    }
    cfg.mode = value;
  } else if (key == "trials") {
    cfg.trials = parse_u64(value);
    if (cfg.trials < 1) throw std::invalid_argument("trials must be >= 1");
  } else if (key == "out") {
    if (value.empty()) throw std::invalid_argument("out must not be empty");
    cfg.out = value;
  } else if (key == "threshold") {
    cfg.threshold = parse_u64(value);
    if (cfg.threshold < 2) throw std::invalid_argument("threshold must be >= 2");
  } else if (key == "c1") {
    cfg.c1 = parse_f64(value);
    if (!(cfg.c1 > 0.0)) throw std::invalid_argument("c1 must be > 0");
  } else if (key == "threads") {
    const long long v = parse_ll(value);
    if (v < 0 || v > 4096) throw std::invalid_argument("threads must be in [0, 4096]");
    cfg.threads = static_cast<int>(v);
  } else {
    throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  char buf[65536];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    const auto got = static_cast<std::size_t>(in.gcount());
    for (std::size_t i = 0; i < got; ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 0x100000001b3ULL;
    }
  }
  return hash;
}

std::string format_g(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

int cmd_source_info(const std::string& spec, std::ostream& out) {
  const JointPMF base = load_source(spec);
  const SourceStats st = info_stats(base);
  out << "source=" << spec << '\n'
      << "x_size=" << base.x_size << '\n'
      << "z_size=" << base.z_size << '\n'
      << "h_cond=" << g12(st.h_cond) << '\n'
      << "sigma2=" << g12(st.sigma2) << '\n'
      << "sigma=" << g12(std::sqrt(st.sigma2)) << '\n'
      << "rho3=" << g12(st.rho3) << '\n'
      << "constant_info_density=" << (constant_info_density(base) ? 1 : 0) << '\n'
      << "compression_limit=" << g12(st.compression_limit) << '\n';
  return 0;
}

namespace {

struct SecurityRow {
  int n = 0;
  std::uint64_t m = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  double eps = 0, delta = 0, d = 0, d_n = 0, d_rn = 0, b_n = 0, dist = 0;
};

std::string security_csv(const ExperimentConfig& cfg, const JointPMF& base,
                         const SourceStats& st) {
  struct Task {
    int n;
    std::uint64_t m, seed;
  };
  std::vector<Task> tasks;
  for (const int n : cfg.n_values) {
    for (const std::uint64_t m : rate_key_counts(cfg.rate, n, st.h_cond)) {
      for (const std::uint64_t seed : config_seeds(cfg)) {
        tasks.push_back({n, m, seed});
      }
    }
  }
  std::vector<SecurityRow> rows(tasks.size());
  run_parallel(tasks.size(), cfg.threads, [&](std::size_t i) {
    const Task& t = tasks[i];
    SecurityRow& row = rows[i];
    row.n = t.n;
    row.m = t.m;
    row.seed = t.seed;
    const ProductSource src{base, t.n, cfg.threshold};
    if (!feasible_code(src, t.m)) return;  // stays skipped
    try {
      const EncoderMap enc = random_binning(src.x_tuple_count(), t.n, t.m, t.seed);
      const CodePair code = repair_decoder({enc, map_decoder(src, enc)});
      row.eps = cfg.mode == "mc"
                    ? error_probability_mc(src, code, t.seed, cfg.trials).value
                    : error_probability(src, code).value;
      const SecurityReport rep = security_report(src, enc);
      row.delta = rep.delta_metric;
      row.d = rep.divergence;
      row.d_n = rep.normalized;
      row.d_rn = rep.root_scaled;
      row.b_n = rep.second_order_rate;
      row.dist = rep.distinguish_prob;
      row.ok = true;
    } catch (const std::runtime_error&) {
      row.ok = false;  // a guard fired below the precheck granularity
    }
  });
  std::string csv = "n,M,seed,eps,delta,D_nats,D_over_n,D_over_sqrt_n,b_n,distinguish,status\n";
  for (const SecurityRow& r : rows) {
    csv += std::to_string(r.n) + ',' + std::to_string(r.m) + ',' +
           std::to_string(r.seed) + ',';
    if (r.ok) {
      csv += g12(r.eps) + ',' + g12(r.delta) + ',' + g12(r.d) + ',' +
             g12(r.d_n) + ',' + g12(r.d_rn) + ',' + g12(r.b_n) + ',' +
             g12(r.dist) + ",ok\n";
    } else {
      csv += ",,,,,,,";
      csv += kSkipped;
      csv += '\n';
    }
  }
  return csv;
}

struct DeltaOutputs {
  std::string summary;
  std::string curve;
};

DeltaOutputs delta_csvs(const ExperimentConfig& cfg, const JointPMF& base) {
  struct Result {
    bool ok = false;
    DeltaCurve curve;
  };
  std::vector<Result> results(cfg.n_values.size());
  run_parallel(cfg.n_values.size(), cfg.threads, [&](std::size_t i) {
    try {
      results[i].curve = delta_exact(base, cfg.n_values[i]);
      results[i].ok = true;
    } catch (const std::runtime_error&) {
      results[i].ok = false;
    }
  });
  DeltaOutputs out;
  out.summary = "n,best_m,delta,status\n";
  out.curve = "n,m,distance\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const int n = cfg.n_values[i];
    if (!results[i].ok) {
      out.summary += std::to_string(n) + ",,,";
      out.summary += kSkipped;
      out.summary += '\n';
      continue;
    }
    const DeltaCurve& curve = results[i].curve;
    out.summary += std::to_string(n) + ',' + std::to_string(curve.best_m) + ',' +
                   g12(curve.delta) + ",ok\n";
    for (const DeltaPoint& pt : curve.points) {
      out.curve += std::to_string(n) + ',' + std::to_string(pt.m) + ',' +
                   g12(pt.distance) + '\n';
    }
  }
  return out;
}

std::string bounds_csv(const ExperimentConfig& cfg, const JointPMF& base,
                       const SourceStats& st) {
  struct TaskResult {
    int n = 0;
    double b = 0;
    bool delta_ok = false;
    DistanceLowerBound dlb;
    bool code_ok = false;
    std::uint64_t code_m = 0;
    ChainReport chain;
    double gauss_floor = 0;
    bool converse_ok = false;
    double converse = 0;
  };
  std::vector<std::pair<int, double>> grid;
  for (const int n : cfg.n_values) {
    for (const double b : cfg.b_values) grid.emplace_back(n, b);
  }
  std::vector<TaskResult> results(grid.size());
  run_parallel(grid.size(), cfg.threads, [&](std::size_t i) {
    TaskResult& r = results[i];
    r.n = grid[i].first;
    r.b = grid[i].second;
    const double root_n = std::sqrt(static_cast<double>(r.n));
    r.gauss_floor = divergence_rate_floor(r.b, std::sqrt(st.sigma2));
    try {
      r.dlb = distance_lower_bound(base, r.n, r.b, cfg.c1);
      r.delta_ok = true;
    } catch (const std::runtime_error&) {
    }
    const double target = std::ceil(std::exp(r.n * st.h_cond + r.b * root_n));
    if (target >= 1.0 && target <= 9.007199254740992e15) {
      r.code_m = static_cast<std::uint64_t>(target);
      const ProductSource src{base, r.n, cfg.threshold};
      if (feasible_code(src, r.code_m)) {
        try {
          const EncoderMap enc =
              random_binning(src.x_tuple_count(), r.n, r.code_m, cfg.seed0);
          r.chain = divergence_floor_chain(src, enc, r.b);
          r.code_ok = true;
        } catch (const std::runtime_error&) {
        }
      }
      try {
        r.converse = converse_bound(base, r.n, r.code_m,
                                    default_alpha_grid(st, r.n));
        r.converse_ok = true;
      } catch (const std::runtime_error&) {
      }
    }
  });
  std::string csv =
      "n,b,delta_m,delta,lower,high_flat,low_family,band,exp_bound,band_bound,"
      "code_m,rate_floor,divergence_root_n,entropy_bound,key_equivocation,"
      "typical_mass,gauss_floor,converse,status\n";
  for (const TaskResult& r : results) {
    csv += std::to_string(r.n) + ',' + g12(r.b) + ',';
    if (r.delta_ok) {
      const PartitionReport& p = r.dlb.partition;
      csv += std::to_string(r.dlb.m) + ',' + g12(r.dlb.delta) + ',' +
             g12(r.dlb.lower) + ',' + g12(p.high_flat_mass) + ',' +
             g12(p.low_family_mass) + ',' + g12(p.band_mass) + ',' +
             g12(p.exp_bound) + ',' + g12(p.band_bound) + ',';
    } else {
      csv += ",,,,,,,,";
    }
    if (r.code_ok) {
      csv += std::to_string(r.code_m) + ',' + g12(r.chain.bound.rate_floor) +
             ',' + g12(r.chain.root_scaled) + ',' +
             g12(r.chain.bound.entropy_bound) + ',' +
             g12(r.chain.bound.key_equivocation) + ',' +
             g12(r.chain.bound.typical_mass) + ',';
    } else {
      csv += ",,,,,,";
    }
    csv += g12(r.gauss_floor) + ',';
    if (r.converse_ok) csv += g12(r.converse);
    csv += ',';
    csv += (r.delta_ok && r.code_ok && r.converse_ok) ? "ok" : kSkipped;
    csv += '\n';
  }
  return csv;
}

std::string manifest_text(const ExperimentConfig& cfg,
                          const std::vector<CsvFile>& files) {
  std::ostringstream out;
  out << "# skaudit run manifest\n"
      << "version=" << kVersion << '\n'
      << "timestamp=" << iso_timestamp() << '\n'
      << "config.source=" << cfg.source << '\n'
      << "config.n=" << join_int(cfg.n_values) << '\n'
      << "config.rate=" << rate_to_string(cfg.rate) << '\n'
      << "config.seeds=" << cfg.seeds << '\n'
      << "config.seed0=" << cfg.seed0 << '\n'
      << "config.b=" << join_f64(cfg.b_values) << '\n'
      << "config.mode=" << cfg.mode << '\n'
      << "config.trials=" << cfg.trials << '\n'
      << "config.out=" << cfg.out << '\n'
      << "config.threshold=" << cfg.threshold << '\n'
      << "config.c1=" << g12(cfg.c1) << '\n'
      << "config.threads=" << cfg.threads << '\n'
      << "seeds=" << join_u64(config_seeds(cfg)) << '\n';
  for (const CsvFile& f : files) {
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(
                      fnv1a64(f.content.data(), f.content.size())));
    out << "file=" << f.name << " fnv1a=0x" << hash << '\n';
  }
  return out.str();
}

}  // namespace

int cmd_sweep(const ExperimentConfig& cfg, std::ostream& log) {
  const JointPMF base = load_source(cfg.source);
  const SourceStats st = info_stats(base);
  std::vector<CsvFile> files;
  files.push_back({"security.csv", security_csv(cfg, base, st)});
  const DeltaOutputs dexp = delta_csvs(cfg, base);
  files.push_back({"delta.csv", dexp.summary});
  files.push_back({"delta_curve.csv", dexp.curve});
  files.push_back({"bounds.csv", bounds_csv(cfg, base, st)});

  const std::filesystem::path dir(cfg.out);
  std::filesystem::create_directories(dir);
  for (const CsvFile& f : files) {
    write_file(dir / f.name, f.content);
    log << "wrote " << (dir / f.name).string() << '\n';
  }
  write_file(dir / "manifest.txt", manifest_text(cfg, files));
  log << "wrote " << (dir / "manifest.txt").string() << '\n';
  return 0;
}

int cmd_delta(const std::string& spec, int n, std::ostream& out) {
  const JointPMF base = load_source(spec);
  const DeltaCurve curve = delta_exact(base, n);
  out << "# source=" << spec << " n=" << n << '\n' << "m,distance\n";
  for (const DeltaPoint& pt : curve.points) {
    out << pt.m << ',' << g12(pt.distance) << '\n';
  }
  out << "# best_m=" << curve.best_m << " delta=" << g12(curve.delta) << '\n';
  return 0;
}

int cmd_bounds(const std::string& spec, int n, double b, double c1,
               std::ostream& out) {
  const JointPMF base = load_source(spec);
  const SourceStats st = info_stats(base);
  const DistanceLowerBound dlb = distance_lower_bound(base, n, b, c1);
  const double root_n = std::sqrt(static_cast<double>(n));
  const auto code_m = static_cast<std::uint64_t>(
      std::ceil(std::exp(n * st.h_cond + b * root_n)));
  const ProductSource src{base, n};
  const EncoderMap enc = random_binning(src.x_tuple_count(), n, code_m, 1);
  const ChainReport chain = divergence_floor_chain(src, enc, b);
  out << "source=" << spec << '\n'
      << "n=" << n << '\n'
      << "b=" << g12(b) << '\n'
      << "delta_m=" << dlb.m << '\n'
      << "delta=" << g12(dlb.delta) << '\n'
      << "lower=" << g12(dlb.lower) << '\n'
      << "high_flat=" << g12(dlb.partition.high_flat_mass) << '\n'
      << "low_family=" << g12(dlb.partition.low_family_mass) << '\n'
      << "band=" << g12(dlb.partition.band_mass) << '\n'
      << "exp_bound=" << g12(dlb.partition.exp_bound) << '\n'
      << "band_bound=" << g12(dlb.partition.band_bound) << '\n'
      << "code_m=" << code_m << '\n'
      << "rate_floor=" << g12(chain.bound.rate_floor) << '\n'
      << "divergence_root_n=" << g12(chain.root_scaled) << '\n'
      << "entropy_bound=" << g12(chain.bound.entropy_bound) << '\n'
      << "key_equivocation=" << g12(chain.bound.key_equivocation) << '\n'
      << "typical_mass=" << g12(chain.bound.typical_mass) << '\n'
      << "gauss_floor=" << g12(divergence_rate_floor(b, std::sqrt(st.sigma2)))
      << '\n'
      << "converse=" << g12(converse_bound(base, n, code_m,
                                           default_alpha_grid(st, n)))
      << '\n';
  return 0;
}

namespace {

struct VerifyState {
  std::ostream& out;
  int failures = 0;

  void pass(const std::string& name) { out << "[ok] " << name << '\n'; }
  void fail(const std::string& name, const std::string& detail) {
    out << "[FAIL] " << name << ": " << detail << '\n';
    ++failures;
  }
  void result(const std::string& name, bool ok, const std::string& detail) {
    if (ok) {
      pass(name);
    } else {
      fail(name, detail);
    }
  }
};

std::vector<std::uint64_t> verify_key_counts(const ProductSource& src,
                                             double h_cond) {
  std::vector<std::uint64_t> ms{1, 2};
  const auto mid = static_cast<std::uint64_t>(std::ceil(std::exp(src.n * h_cond)));
  if (mid != 1 && mid != 2) ms.push_back(mid);
  return ms;
}

}  // namespace

int cmd_verify(const ExperimentConfig& cfg, bool perturb_delta,
               std::ostream& out) {
  const JointPMF base = load_source(cfg.source);
  const SourceStats st = info_stats(base);
  const double bias = perturb_delta ? 0.05 : 0.0;
  VerifyState v{out};
  if (perturb_delta) out << "# distance values deliberately perturbed by 0.05\n";

  const int seed_count = std::min(cfg.seeds, 3);

  // report invariants + both divergence routes + distinguisher consistency
  {
    bool ok = true;
    std::string detail;
    for (const int n : cfg.n_values) {
      const ProductSource src{base, n, cfg.threshold};
      for (const std::uint64_t m : verify_key_counts(src, st.h_cond)) {
        if (!feasible_code(src, m)) continue;
        for (int s = 0; s < seed_count && ok; ++s) {
          const std::uint64_t seed = cfg.seed0 + static_cast<std::uint64_t>(s);
          const EncoderMap enc = random_binning(src.x_tuple_count(), n, m, seed);
          const SecurityReport rep = security_report(src, enc);
          const double lhs = 2.0 * rep.delta_metric * rep.delta_metric;
          if (rep.divergence < lhs - 1e-12 || rep.divergence < -1e-12 ||
              std::fabs(rep.distinguish_prob -
                        0.5 * (1.0 + rep.delta_metric)) > 1e-12) {
            ok = false;
            detail = "n=" + std::to_string(n) + " m=" + std::to_string(m) +
                     " seed=" + std::to_string(seed);
          }
          const double brute =
              brute_force_discrimination(key_eve_joint(src, enc));
          if (std::fabs(brute - rep.distinguish_prob) > 1e-12) {
            ok = false;
            detail = "distinguisher mismatch at n=" + std::to_string(n);
          }
        }
      }
    }
    v.result("report-invariants", ok, detail);
  }

  // truncated-entropy chain residuals, including both divergence routes
  {
    bool ok = true;
    std::string detail;
    for (const int n : cfg.n_values) {
      const ProductSource src{base, n, cfg.threshold};
      const auto m = verify_key_counts(src, st.h_cond).back();
      if (!feasible_code(src, m)) continue;
      const EncoderMap enc = random_binning(src.x_tuple_count(), n, m, cfg.seed0);
      for (const double b : cfg.b_values) {
        const ChainReport chain = divergence_floor_chain(src, enc, b);
        if (chain.truncation < -1e-9 || chain.floor_chain < -1e-9 ||
            chain.identity_forward < -1e-9 || chain.identity_backward < -1e-9) {
          ok = false;
          detail = "n=" + std::to_string(n) + " b=" + g12(b);
        }
      }
    }
    v.result("entropy-chain", ok, detail);
  }

  // the error + distance vs best-achievable-distance trade-off
  {
    bool ok = true;
    std::string detail;
    for (const int n : cfg.n_values) {
      const ProductSource src{base, n, cfg.threshold};
      DeltaCurve curve;
      try {
        curve = delta_exact(base, n);
      } catch (const std::runtime_error&) {
        continue;
      }
      const double target = curve.delta + bias;
      auto ms = verify_key_counts(src, st.h_cond);
      ms.push_back(curve.best_m);
      for (const std::uint64_t m : ms) {
        if (!feasible_code(src, m)) continue;
        for (int s = 0; s < seed_count && ok; ++s) {
          const std::uint64_t seed = cfg.seed0 + static_cast<std::uint64_t>(s);
          const EncoderMap enc = random_binning(src.x_tuple_count(), n, m, seed);
          const CodePair code = repair_decoder({enc, map_decoder(src, enc)});
          const double eps = error_probability(src, code).value;
          const double delta = security_report(src, enc).delta_metric;
          if (eps + delta < target - 1e-9) {
            ok = false;
            detail = "n=" + std::to_string(n) + " m=" + std::to_string(m) +
                     " seed=" + std::to_string(seed) + " eps+delta=" +
                     g12(eps + delta) + " < " + g12(target);
          }
        }
      }
    }
    v.result("trade-off", ok, detail);
  }

  // partition region guarantees and the implied distance lower bound
  {
    bool ok = true;
    std::string detail;
    for (const int n : cfg.n_values) {
      for (const double b : cfg.b_values) {
        DistanceLowerBound dlb;
        try {
          dlb = distance_lower_bound(base, n, b, cfg.c1);
        } catch (const std::runtime_error&) {
          continue;
        }
        const PartitionReport& p = dlb.partition;
        const double delta_used = dlb.delta - bias;  // sabotage pulls it down
        if (p.high_flat_mass > p.exp_bound + 1e-12 ||
            p.low_family_mass > p.exp_bound + 1e-12 ||
            p.band_mass > p.band_bound + 1e-12 ||
            dlb.lower > delta_used + 1e-9) {
          ok = false;
          detail = "n=" + std::to_string(n) + " b=" + g12(b) + " lower=" +
                   g12(dlb.lower) + " delta=" + g12(delta_used);
        }
      }
    }
    v.result("partition-bounds", ok, detail);
  }

  // no code beats the info-density converse
  {
    bool ok = true;
    std::string detail;
    for (const int n : cfg.n_values) {
      const ProductSource src{base, n, cfg.threshold};
      for (const std::uint64_t m : verify_key_counts(src, st.h_cond)) {
        if (!feasible_code(src, m)) continue;
        double bound = 0.0;
        try {
          bound = converse_bound(base, n, m, default_alpha_grid(st, n));
        } catch (const std::runtime_error&) {
          continue;
        }
        for (int s = 0; s < seed_count && ok; ++s) {
          const std::uint64_t seed = cfg.seed0 + static_cast<std::uint64_t>(s);
          const EncoderMap enc = random_binning(src.x_tuple_count(), n, m, seed);
          const CodePair code = repair_decoder({enc, map_decoder(src, enc)});
          const double eps = error_probability(src, code).value;
          if (eps < bound - 1e-9) {
            ok = false;
            detail = "n=" + std::to_string(n) + " m=" + std::to_string(m) +
                     " eps=" + g12(eps) + " < bound=" + g12(bound);
          }
        }
      }
    }
    v.result("converse-vs-codes", ok, detail);
  }

  // the trade-off also holds with no product structure at all
  {
    bool ok = true;
    std::string detail;
    for (std::uint64_t trial = 1; trial <= 20 && ok; ++trial) {
      Rng rng(trial * 7919);
      std::vector<std::vector<double>> cells(4, std::vector<double>(4));
      double total = 0.0;
      for (auto& row : cells) {
        for (auto& c : row) {
          c = std::floor(rng.next_double() * 16.0) / 16.0;
          total += c;
        }
      }
      if (total <= 0.0) continue;
      for (auto& row : cells) {
        for (auto& c : row) c /= total;
      }
      const JointPMF joint = construct_joint(cells);
      const DeltaCurve curve = delta_exact_tuple(joint);
      const double target = curve.delta + bias;
      for (std::uint64_t m = 1; m <= 4 && ok; ++m) {
        for (std::uint64_t seed = 1; seed <= 3 && ok; ++seed) {
          const EncoderMap enc = random_binning(4, 1, m, seed);
          const CodePair code =
              repair_decoder({enc, map_decoder(joint, 1, enc)});
          const double eps = error_probability(joint, 1, code).value;
          const double delta = security_report(joint, 1, enc).delta_metric;
          if (eps + delta < target - 1e-9) {
            ok = false;
            detail = "trial=" + std::to_string(trial) + " m=" +
                     std::to_string(m) + " eps+delta=" + g12(eps + delta) +
                     " < " + g12(target);
          }
        }
      }
    }
    v.result("non-iid-trade-off", ok, detail);
  }

  // closed-form vs quadrature rate floor
  {
    bool ok = true;
    std::string detail;
    const double sigma_src = std::sqrt(st.sigma2);
    for (double b = -1.0; b <= 1.0 + 1e-12; b += 0.25) {
      for (const double sigma : {0.3, sigma_src, 2.0}) {
        if (sigma <= 0.0) continue;
        const double closed = divergence_rate_floor(b, sigma);
        const double quad = divergence_rate_floor_quadrature(b, sigma);
        if (std::fabs(closed - quad) > 1e-10) {
          ok = false;
          detail = "b=" + g12(b) + " sigma=" + g12(sigma);
        }
      }
    }
    v.result("gauss-floor-routes", ok, detail);
  }

  // flat sources reach distance zero exactly
  {
    bool ok = true;
    std::string detail;
    for (const char* spec : {"indep:2", "det:2"}) {
      for (int n = 1; n <= 4; ++n) {
        if (delta_exact(load_source(spec), n).delta != 0.0) {
          ok = false;
          detail = std::string(spec) + " n=" + std::to_string(n);
        }
      }
    }
    v.result("flat-sources", ok, detail);
  }

  out << "verify: " << (v.failures == 0 ? "all checks passed"
                                        : std::to_string(v.failures) +
                                              " check(s) failed")
      << '\n';
  return v.failures == 0 ? 0 : 1;
}

}  // namespace skaudit
