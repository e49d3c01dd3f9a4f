#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "skaudit/source_core.hpp"

namespace skaudit {

inline constexpr const char* kVersion = "0.1.0";

// How the key count m is chosen per block length n:
//   fixed:<m>        the same m at every n
//   margin:<nats>    m = ceil(exp(n * (h + nats))), clamped to >= 1
//   list:<a,b,...>   an explicit set of m values used at every n
struct RateSpec {
  enum class Kind { fixed, margin, list };
  Kind kind = Kind::margin;
  std::uint64_t fixed = 0;
  double margin = 0.0;
  std::vector<std::uint64_t> list;
};
RateSpec parse_rate(const std::string& text);
std::vector<std::uint64_t> rate_key_counts(const RateSpec& rate, int n,
                                           double h_cond);

// Everything a sweep or verification run needs. Every field has a default so
// a config file can set any subset; command-line overrides use the same keys.
struct ExperimentConfig {
  std::string source{"bsc:0.1"};
  std::vector<int> n_values{4, 6, 8, 10, 12};
  RateSpec rate{RateSpec::Kind::margin, 0, 0.0, {}};
  int seeds = 10;              // number of encoder seeds per (n, m)
  std::uint64_t seed0 = 1;     // first seed value
  std::vector<double> b_values{0.3};
  std::string mode{"exact"};   // "exact" or "mc"
  std::uint64_t trials = 100'000;  // samples per Monte Carlo estimate
  std::string out{"out"};
  std::uint64_t threshold = kDefaultMaterializeThreshold;
  double c1 = 0.4748;
  int threads = 0;  // 0 = hardware concurrency; SKAUDIT_THREADS caps it
};

ExperimentConfig parse_config_file(const std::string& path);
// Applies one key=value pair; throws std::invalid_argument on unknown keys
// or unparsable values. Keys: source, n, rate, seeds, seed0, b, mode,
// trials, out, threshold, c1, threads.
void apply_override(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value);

std::vector<int> parse_int_list(const std::string& text);      // "1,2" or "1..8"
std::vector<double> parse_double_list(const std::string& text);

// 64-bit FNV-1a, used for the output-file checksums in the run manifest.
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t fnv1a64_file(const std::string& path);

// snprintf("%.<digits>g") formatting used for every number in CSV and SVG
// output, so reruns are byte-identical.
std::string format_g(double v, int digits);

// Subcommand bodies; each returns a process exit code (0 ok, 1 verification
// failure, 2 usage/config error).
int cmd_source_info(const std::string& spec, std::ostream& out);
int cmd_sweep(const ExperimentConfig& cfg, std::ostream& log);
int cmd_delta(const std::string& spec, int n, std::ostream& out);
int cmd_bounds(const std::string& spec, int n, double b, double c1,
               std::ostream& out);
int cmd_verify(const ExperimentConfig& cfg, bool perturb_delta,
               std::ostream& out);
int cmd_plot(const std::vector<std::string>& csv_paths,
             const std::string& out_dir, std::ostream& log);

}  // namespace skaudit
