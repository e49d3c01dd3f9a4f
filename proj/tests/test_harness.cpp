#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "skaudit/harness.hpp"
#include "skaudit/security_metrics.hpp"
#include "skaudit/source_core.hpp"
#include "skaudit/sw_codes.hpp"
#include "skaudit/theory_bounds.hpp"

using namespace skaudit;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "skaudit_harness_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(static_cast<bool>(in));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

std::vector<std::string> cells_of(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

ExperimentConfig small_config(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.source = "bsc:0.1";
  cfg.n_values = {2, 3};
  cfg.rate = parse_rate("list:1,2");
  cfg.seeds = 2;
  cfg.seed0 = 1;
  cfg.b_values = {0.3};
  cfg.out = out.string();
  return cfg;
}

}  // namespace

TEST_CASE("integer and number list parsing") {
  CHECK(parse_int_list("1,2,3") == std::vector<int>{1, 2, 3});
  CHECK(parse_int_list("1..4") == std::vector<int>{1, 2, 3, 4});
  CHECK(parse_int_list("1..3,7") == std::vector<int>{1, 2, 3, 7});
  CHECK_THROWS_AS(parse_int_list("4..1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_int_list("a"), std::invalid_argument);
  CHECK(parse_double_list("0.1,0.3").size() == 2);
  CHECK_THROWS_AS(parse_double_list("0.1,x"), std::invalid_argument);
}

TEST_CASE("rate policies") {
  const RateSpec fixed = parse_rate("fixed:5");
  CHECK(rate_key_counts(fixed, 9, 0.3) == std::vector<std::uint64_t>{5});
  const RateSpec list = parse_rate("list:1,2,4");
  CHECK(rate_key_counts(list, 3, 0.3) == (std::vector<std::uint64_t>{1, 2, 4}));
  const RateSpec margin = parse_rate("margin:0.1");
  const double h = info_stats(load_source("bsc:0.1")).h_cond;
  for (const int n : {4, 8, 12}) {
    const auto ms = rate_key_counts(margin, n, h);
    REQUIRE(ms.size() == 1);
    CHECK(ms[0] == static_cast<std::uint64_t>(std::ceil(std::exp(n * (h + 0.1)))));
  }
  // a strongly negative margin clamps at one key value; a huge one overflows
  CHECK(rate_key_counts(parse_rate("margin:-5"), 4, h) ==
        std::vector<std::uint64_t>{1});
  CHECK_THROWS_AS(rate_key_counts(parse_rate("margin:5"), 8, h),
                  std::runtime_error);
  CHECK_THROWS_AS(parse_rate("fixed:0"), std::invalid_argument);
  CHECK_THROWS_AS(parse_rate("slope:1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_rate("margin"), std::invalid_argument);
  CHECK_THROWS_AS(parse_rate("list:"), std::invalid_argument);
}

TEST_CASE("config files and overrides") {
  const fs::path dir = scratch_dir("config");
  const fs::path path = dir / "exp.cfg";
  {
    std::ofstream out(path);
    out << "# comment line\n"
        << "source = bsc:0.2\n"
        << "n = 1..4\n"
        << "rate = fixed:3\n"
        << "seeds = 7\n"
        << "seed0 = 11\n"
        << "b = 0.1,0.5\n"
        << "mode = mc\n"
        << "trials = 5000\n"
        << "out = results\n"
        << "threshold = 1024\n"
        << "c1 = 0.5\n"
        << "threads = 2\n";
  }
  ExperimentConfig cfg = parse_config_file(path.string());
  CHECK(cfg.source == "bsc:0.2");
  CHECK(cfg.n_values == std::vector<int>{1, 2, 3, 4});
  CHECK(cfg.rate.kind == RateSpec::Kind::fixed);
  CHECK(cfg.seeds == 7);
  CHECK(cfg.seed0 == 11);
  CHECK(cfg.b_values == std::vector<double>{0.1, 0.5});
  CHECK(cfg.mode == "mc");
  CHECK(cfg.trials == 5000);
  CHECK(cfg.out == "results");
  CHECK(cfg.threshold == 1024);
  CHECK(cfg.c1 == 0.5);
  CHECK(cfg.threads == 2);

  apply_override(cfg, "mode", "exact");
  CHECK(cfg.mode == "exact");
  CHECK_THROWS_AS(apply_override(cfg, "unknown_key", "1"), std::invalid_argument);
  CHECK_THROWS_AS(apply_override(cfg, "mode", "fast"), std::invalid_argument);
  CHECK_THROWS_AS(apply_override(cfg, "n", "0,1"), std::invalid_argument);
  CHECK_THROWS_AS(apply_override(cfg, "b", "-0.1"), std::invalid_argument);
  CHECK_THROWS_AS(apply_override(cfg, "seeds", "0"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config_file((dir / "missing.cfg").string()),
                  std::invalid_argument);
  {
    std::ofstream out(dir / "bad.cfg");
    out << "just words\n";
  }
  CHECK_THROWS_AS(parse_config_file((dir / "bad.cfg").string()),
                  std::invalid_argument);
}

TEST_CASE("checksums and number formatting") {
  CHECK(fnv1a64("", 0) == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a", 1) == 0xaf63dc4c8601ec8cULL);
  const fs::path dir = scratch_dir("fnv");
  {
    std::ofstream out(dir / "x.bin", std::ios::binary);
    out << "abc";
  }
  CHECK(fnv1a64_file((dir / "x.bin").string()) == fnv1a64("abc", 3));
  CHECK(format_g(0.1, 12) == "0.1");
  CHECK(format_g(1.0 / 3.0, 6) == "0.333333");
  CHECK(format_g(1e-30, 12) == "1e-30");
}

TEST_CASE("source info output") {
  std::ostringstream out;
  CHECK(cmd_source_info("bsc:0.1", out) == 0);
  const std::string text = out.str();
  CHECK(text.find("x_size=2") != std::string::npos);
  CHECK(text.find("h_cond=0.325082973391") != std::string::npos);
  CHECK(text.find("sigma=0.659167373201") != std::string::npos);
  CHECK(text.find("constant_info_density=0") != std::string::npos);
  std::ostringstream flat;
  cmd_source_info("indep:2", flat);
  CHECK(flat.str().find("constant_info_density=1") != std::string::npos);
}

TEST_CASE("sweep outputs: shape, values, and reproducibility") {
  const fs::path dir = scratch_dir("sweep_a");
  ExperimentConfig cfg = small_config(dir);
  std::ostringstream log;
  REQUIRE(cmd_sweep(cfg, log) == 0);
  for (const char* name : {"security.csv", "delta.csv", "delta_curve.csv",
                           "bounds.csv", "manifest.txt"}) {
    CHECK(fs::exists(dir / name));
  }

  const auto sec = lines_of(slurp(dir / "security.csv"));
  REQUIRE(sec.size() == 9);  // header + 2n * 2m * 2seeds
  CHECK(sec[0] ==
        "n,M,seed,eps,delta,D_nats,D_over_n,D_over_sqrt_n,b_n,distinguish,status");
  for (std::size_t i = 1; i < sec.size(); ++i) {
    const auto cells = cells_of(sec[i]);
    REQUIRE(cells.size() == 11);
    CHECK(cells[10] == "ok");
  }
  // recompute one row end to end: n=3, M=2, seed=2 is the last row
  {
    const auto cells = cells_of(sec[8]);
    REQUIRE(cells[0] == "3");
    REQUIRE(cells[1] == "2");
    REQUIRE(cells[2] == "2");
    const ProductSource src{load_source("bsc:0.1"), 3};
    const EncoderMap enc = random_binning(8, 3, 2, 2);
    const CodePair code = repair_decoder({enc, map_decoder(src, enc)});
    const SecurityReport rep = security_report(src, enc);
    CHECK(std::stod(cells[3]) ==
          doctest::Approx(error_probability(src, code).value).epsilon(1e-10));
    CHECK(std::stod(cells[4]) == doctest::Approx(rep.delta_metric).epsilon(1e-10));
    CHECK(std::stod(cells[5]) == doctest::Approx(rep.divergence).epsilon(1e-10));
    CHECK(std::stod(cells[9]) ==
          doctest::Approx(rep.distinguish_prob).epsilon(1e-10));
  }

  const auto del = lines_of(slurp(dir / "delta.csv"));
  REQUIRE(del.size() == 3);
  CHECK(del[0] == "n,best_m,delta,status");
  {
    const auto cells = cells_of(del[1]);
    CHECK(cells[0] == "2");
    CHECK(cells[1] == "1");
    CHECK(std::stod(cells[2]) == doctest::Approx(0.19).epsilon(1e-10));
  }
  const auto curve = lines_of(slurp(dir / "delta_curve.csv"));
  REQUIRE(curve.size() == 13);  // header + (2^2) + (2^3)
  const auto bounds = lines_of(slurp(dir / "bounds.csv"));
  REQUIRE(bounds.size() == 3);
  for (std::size_t i = 1; i < bounds.size(); ++i) {
    CHECK(cells_of(bounds[i]).size() == 19);
    CHECK(cells_of(bounds[i])[18] == "ok");
  }

  // manifest checksums match the files on disk
  const auto manifest = lines_of(slurp(dir / "manifest.txt"));
  int checked = 0;
  for (const auto& line : manifest) {
    if (line.rfind("file=", 0) != 0) continue;
    const auto space = line.find(' ');
    const std::string name = line.substr(5, space - 5);
    const std::string hash = line.substr(line.find("fnv1a=0x") + 8);
    char expect[32];
    std::snprintf(expect, sizeof expect, "%016llx",
                  static_cast<unsigned long long>(
                      fnv1a64_file((dir / name).string())));
    CHECK(hash == expect);
    ++checked;
  }
  CHECK(checked == 4);

  // rerun into a fresh directory: byte-identical CSVs, also with one thread
  const fs::path dir2 = scratch_dir("sweep_b");
  ExperimentConfig cfg2 = small_config(dir2);
  cfg2.threads = 1;
  std::ostringstream log2;
  REQUIRE(cmd_sweep(cfg2, log2) == 0);
  for (const char* name : {"security.csv", "delta.csv", "delta_curve.csv",
                           "bounds.csv"}) {
    CHECK(slurp(dir / name) == slurp(dir2 / name));
  }
}

TEST_CASE("sweep marks infeasible rows instead of failing") {
  const fs::path dir = scratch_dir("sweep_skip");
  ExperimentConfig cfg = small_config(dir);
  cfg.threshold = 16;  // 2^n * 2^n exceeds this at n = 3
  std::ostringstream log;
  REQUIRE(cmd_sweep(cfg, log) == 0);
  const auto sec = lines_of(slurp(dir / "security.csv"));
  REQUIRE(sec.size() == 9);
  int ok = 0, skipped = 0;
  for (std::size_t i = 1; i < sec.size(); ++i) {
    const auto cells = cells_of(sec[i]);
    REQUIRE(cells.size() == 11);
    if (cells[10] == "ok") {
      ++ok;
    } else {
      CHECK(cells[10] == "skipped=threshold");
      CHECK(cells[3].empty());
      ++skipped;
    }
  }
  CHECK(ok == 4);       // n = 2 rows fit: 4 * 4 = 16 <= 16
  CHECK(skipped == 4);  // n = 3 rows do not
}

TEST_CASE("monte carlo sweep mode estimates the exact error") {
  const fs::path dir = scratch_dir("sweep_mc");
  ExperimentConfig cfg = small_config(dir);
  cfg.n_values = {4};
  cfg.rate = parse_rate("fixed:3");
  cfg.seeds = 1;
  cfg.mode = "mc";
  cfg.trials = 200'000;
  std::ostringstream log;
  REQUIRE(cmd_sweep(cfg, log) == 0);
  const auto sec = lines_of(slurp(dir / "security.csv"));
  REQUIRE(sec.size() == 2);
  const auto cells = cells_of(sec[1]);
  const ProductSource src{load_source("bsc:0.1"), 4};
  const EncoderMap enc = random_binning(16, 4, 3, 1);
  const CodePair code = repair_decoder({enc, map_decoder(src, enc)});
  const double exact = error_probability(src, code).value;
  CHECK(std::fabs(std::stod(cells[3]) - exact) < 0.01);
}

TEST_CASE("delta and bounds commands print library values") {
  std::ostringstream out;
  REQUIRE(cmd_delta("bsc:0.1", 6, out) == 0);
  const std::string text = out.str();
  CHECK(text.find("m,distance\n") != std::string::npos);
  CHECK(text.find("# best_m=2 delta=0.440951") != std::string::npos);

  std::ostringstream bout;
  REQUIRE(cmd_bounds("bsc:0.1", 9, 0.3, 0.4748, bout) == 0);
  const std::string btext = bout.str();
  CHECK(btext.find("delta_m=23\n") != std::string::npos);
  CHECK(btext.find("band=0.387420489\n") != std::string::npos);
  const DistanceLowerBound dlb = distance_lower_bound(load_source("bsc:0.1"), 9, 0.3);
  CHECK(btext.find("lower=" + format_g(dlb.lower, 12) + "\n") != std::string::npos);
}

TEST_CASE("verification command passes honestly and fails under sabotage") {
  ExperimentConfig cfg;
  cfg.n_values = {4, 9};
  cfg.b_values = {0.3};
  cfg.seeds = 2;
  std::ostringstream clean;
  CHECK(cmd_verify(cfg, false, clean) == 0);
  CHECK(clean.str().find("[FAIL]") == std::string::npos);
  CHECK(clean.str().find("all checks passed") != std::string::npos);

  std::ostringstream sabotaged;
  CHECK(cmd_verify(cfg, true, sabotaged) == 1);
  CHECK(sabotaged.str().find("[FAIL]") != std::string::npos);
  CHECK(sabotaged.str().find("partition-bounds") != std::string::npos);
}

TEST_CASE("plot command renders deterministic charts") {
  const fs::path dir = scratch_dir("plots_src");
  ExperimentConfig cfg = small_config(dir);
  std::ostringstream log;
  REQUIRE(cmd_sweep(cfg, log) == 0);
  const std::vector<std::string> csvs = {
      (dir / "security.csv").string(), (dir / "delta.csv").string(),
      (dir / "delta_curve.csv").string(), (dir / "bounds.csv").string()};

  const fs::path plots1 = scratch_dir("plots_a");
  std::ostringstream plog;
  REQUIRE(cmd_plot(csvs, plots1.string(), plog) == 0);
  const char* names[] = {"delta_metric_vs_n.svg", "divergence_root_n_vs_n.svg",
                         "delta_vs_n.svg", "delta_m_curve.svg"};
  for (const char* name : names) {
    REQUIRE(fs::exists(plots1 / name));
    const std::string svg = slurp(plots1 / name);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("<polyline") != std::string::npos);
  }
  // the divergence chart carries the dashed reference series from bounds.csv
  CHECK(slurp(plots1 / "divergence_root_n_vs_n.svg").find("stroke-dasharray") !=
        std::string::npos);

  const fs::path plots2 = scratch_dir("plots_b");
  std::ostringstream plog2;
  REQUIRE(cmd_plot(csvs, plots2.string(), plog2) == 0);
  for (const char* name : names) CHECK(slurp(plots1 / name) == slurp(plots2 / name));
}

TEST_CASE("plot command rejects empty and unknown inputs") {
  const fs::path dir = scratch_dir("plots_bad");
  {
    std::ofstream out(dir / "empty.csv");
    out << "n,M,seed,eps,delta,D_nats,D_over_n,D_over_sqrt_n,b_n,distinguish,status\n";
  }
  std::ostringstream log;
  CHECK(cmd_plot({(dir / "empty.csv").string()}, (dir / "out").string(), log) == 2);
  CHECK(!fs::exists(dir / "out" / "delta_metric_vs_n.svg"));
  {
    std::ofstream out(dir / "junk.csv");
    out << "a,b,c\n1,2,3\n";
  }
  std::ostringstream log2;
  CHECK(cmd_plot({(dir / "junk.csv").string()}, (dir / "out").string(), log2) == 2);
  std::ostringstream log3;
  CHECK_THROWS_AS(cmd_plot({(dir / "nope.csv").string()}, (dir / "out").string(), log3),
                  std::invalid_argument);
}
