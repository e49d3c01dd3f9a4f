#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <sstream>

#include "doctest.h"
#include "skaudit/rng.hpp"
#include "skaudit/source_core.hpp"
#include "skaudit/sw_codes.hpp"

using namespace skaudit;

namespace {

// Independent error-probability oracle: direct sum over every (x, z) cell.
double brute_error(const ProductSource& source, const CodePair& code) {
  double err = 0.0;
  const std::uint64_t xc = source.x_tuple_count(), zc = source.z_tuple_count();
  for (std::uint64_t zi = 0; zi < zc; ++zi) {
    const auto zt = tuple_unpack(zi, source.base.z_size, source.n);
    for (std::uint64_t xi = 0; xi < xc; ++xi) {
      const auto xt = tuple_unpack(xi, source.base.x_size, source.n);
      if (code.decoder.decode(code.encoder.apply(xi), zi) != xi) {
        err += source.joint_prob(xt, zt);
      }
    }
  }
  return err;
}

CodePair make_code(const ProductSource& source, std::uint64_t m, std::uint64_t seed) {
  const EncoderMap enc = random_binning(source.x_tuple_count(), source.n, m, seed);
  return {enc, map_decoder(source, enc)};
}

}  // namespace

TEST_CASE("random binning is deterministic, in range, and m=1 is constant") {
  const EncoderMap a = random_binning(512, 3, 8, 77);
  const EncoderMap b = random_binning(512, 3, 8, 77);
  const EncoderMap c = random_binning(512, 3, 8, 78);
  bool all_equal = true, any_diff_seed = false;
  for (std::uint64_t x = 0; x < 512; ++x) {
    CHECK(a.apply(x) < 8);
    if (a.apply(x) != b.apply(x)) all_equal = false;
    if (a.apply(x) != c.apply(x)) any_diff_seed = true;
  }
  CHECK(all_equal);
  CHECK(any_diff_seed);
  const EncoderMap constant = random_binning(8, 3, 1, 5);
  for (std::uint64_t x = 0; x < 8; ++x) CHECK(constant.apply(x) == 0);
  CHECK_THROWS_AS(random_binning(8, 3, 0, 5), std::invalid_argument);
}

TEST_CASE("binning fills bins roughly evenly at scale") {
  const std::uint64_t domain = 1 << 16, m = 16;
  const EncoderMap enc = random_binning(domain, 16, m, 12345);
  std::vector<double> counts(m, 0.0);
  for (std::uint64_t x = 0; x < domain; ++x) counts[enc.apply(x)] += 1.0;
  const double expected = static_cast<double>(domain) / m;
  double chi2 = 0.0;
  for (const double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 37.70);  // 0.999 quantile at 15 degrees of freedom
}

TEST_CASE("identity and table encoders") {
  const EncoderMap id = identity_encoder(16, 2);
  CHECK(id.m == 16);
  for (std::uint64_t x = 0; x < 16; ++x) CHECK(id.apply(x) == x);
  const EncoderMap tab = table_encoder(1, 3, {2, 0, 1, 2});
  CHECK(tab.domain_size == 4);
  CHECK(tab.apply(0) == 2);
  CHECK(tab.apply(3) == 2);
  CHECK_THROWS_AS(table_encoder(1, 2, {0, 2}), std::invalid_argument);
  CHECK_THROWS_AS(table_encoder(1, 2, {}), std::invalid_argument);
}

TEST_CASE("hash binning does not have to be a bijection even when m = |X|^n") {
  // With m equal to the domain size collisions are still allowed; only the
  // identity constructor guarantees bijectivity.
  const EncoderMap enc = random_binning(4, 2, 4, 9);
  std::vector<int> hits(4, 0);
  for (std::uint64_t x = 0; x < 4; ++x) hits[enc.apply(x)] += 1;
  int reached = 0;
  for (const int h : hits) reached += h > 0 ? 1 : 0;
  CHECK(reached <= 4);  // structural sanity; bijectivity is not required
}

TEST_CASE("map decoder on the identity encoder is lossless") {
  for (int n = 1; n <= 3; ++n) {
    const ProductSource src{load_source("bsc:0.1"), n};
    const EncoderMap enc = identity_encoder(src.x_tuple_count(), n);
    const CodePair code{enc, map_decoder(src, enc)};
    for (std::uint64_t s = 0; s < enc.m; ++s) {
      for (std::uint64_t z = 0; z < src.z_tuple_count(); ++z) {
        CHECK(code.decoder.decode(s, z) == s);
      }
    }
    CHECK(error_probability(src, code).value == 0.0);
  }
}

TEST_CASE("constant encoder decodes to the conditional mode") {
  const ProductSource src{load_source("bsc:0.1"), 1};
  const CodePair code = make_code(src, 1, 0);
  CHECK(code.decoder.decode(0, 0) == 0);  // x = z is the likelier cell
  CHECK(code.decoder.decode(0, 1) == 1);
  CHECK(error_probability(src, code).value == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("decoded tuples always live in the encoder preimage when nonempty") {
  const ProductSource src{load_source("bsc:0.1"), 4};
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const CodePair code = make_code(src, 5, seed);
    std::vector<bool> nonempty(code.encoder.m, false);
    for (std::uint64_t x = 0; x < src.x_tuple_count(); ++x) {
      nonempty[code.encoder.apply(x)] = true;
    }
    for (std::uint64_t s = 0; s < code.encoder.m; ++s) {
      for (std::uint64_t z = 0; z < src.z_tuple_count(); ++z) {
        if (nonempty[s]) {
          CHECK(code.encoder.apply(code.decoder.decode(s, z)) == s);
        } else {
          CHECK(code.decoder.decode(s, z) == 0);
        }
      }
    }
  }
}

TEST_CASE("map decoding minimizes error among all decoders") {
  // Exhaustive decoder search; feasible for binary sources at n <= 2, m <= 2.
  for (const int n : {1, 2}) {
    const ProductSource src{load_source("bsc:0.2"), n};
    const std::uint64_t xc = src.x_tuple_count(), zc = src.z_tuple_count();
    for (const std::uint64_t m : {std::uint64_t{1}, std::uint64_t{2}}) {
      for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const CodePair code = make_code(src, m, seed);
        const double eps_map = error_probability(src, code).value;
        const std::uint64_t slots = m * zc;
        double eps_min = 1.0;
        std::uint64_t variants = 1;
        for (std::uint64_t i = 0; i < slots; ++i) variants *= xc;
        for (std::uint64_t v = 0; v < variants; ++v) {
          CodePair cand = code;
          std::uint64_t rest = v;
          for (std::uint64_t i = 0; i < slots; ++i) {
            cand.decoder.map[i] = rest % xc;
            rest /= xc;
          }
          eps_min = std::min(eps_min, brute_error(src, cand));
        }
        CHECK(eps_map <= eps_min + 1e-12);
      }
    }
  }
}

TEST_CASE("exact error probability agrees with the brute-force oracle") {
  const ProductSource src{load_source("bsc:0.1"), 3};
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const CodePair code = make_code(src, 1 + seed % 7, seed);
    CHECK(error_probability(src, code).value ==
          doctest::Approx(brute_error(src, code)).epsilon(1e-12));
  }
}

TEST_CASE("repair is a fixed point on decoders that are already consistent") {
  const ProductSource src{load_source("bsc:0.1"), 3};
  const CodePair code = make_code(src, 3, 11);
  const CodePair rep = repair_decoder(code);
  CHECK(rep.decoder.repaired);
  // map decoding already places every reachable symbol inside its bin
  CHECK(rep.decoder.map == code.decoder.map);
}

TEST_CASE("repair rebuilds the all-zero decoder under the identity encoder") {
  const ProductSource src{load_source("bsc:0.1"), 2};
  const EncoderMap enc = identity_encoder(src.x_tuple_count(), 2);
  Decoder zero;
  zero.n = 2;
  zero.m = enc.m;
  zero.z_count = src.z_tuple_count();
  zero.map.assign(enc.m * zero.z_count, 0);
  const CodePair rep = repair_decoder({enc, zero});
  for (std::uint64_t s = 0; s < enc.m; ++s) {
    for (std::uint64_t z = 0; z < zero.z_count; ++z) {
      CHECK(rep.decoder.decode(s, z) == s);
    }
  }
}

TEST_CASE("repair never increases the exact error probability") {
  const ProductSource src{load_source("bsc:0.1"), 3};
  const std::uint64_t xc = src.x_tuple_count(), zc = src.z_tuple_count();
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const std::uint64_t m = 1 + seed % 8;
    const EncoderMap enc = random_binning(xc, 3, m, seed);
    // start from a deliberately bad decoder
    Decoder junk;
    junk.n = 3;
    junk.m = m;
    junk.z_count = zc;
    junk.map.resize(m * zc);
    Rng rng(seed * 31 + 7);
    for (auto& v : junk.map) v = rng.next_u64() % xc;
    const CodePair before{enc, junk};
    const CodePair after = repair_decoder(before);
    const double eps_before = error_probability(src, before).value;
    const double eps_after = error_probability(src, after).value;
    CHECK(eps_after <= eps_before + 1e-15);
    std::vector<bool> nonempty(m, false);
    for (std::uint64_t x = 0; x < xc; ++x) nonempty[enc.apply(x)] = true;
    for (std::uint64_t s = 0; s < m; ++s) {
      if (!nonempty[s]) continue;
      for (std::uint64_t z = 0; z < zc; ++z) {
        CHECK(enc.apply(after.decoder.decode(s, z)) == s);
      }
    }
  }
}

TEST_CASE("monte carlo error estimates agree with exact evaluation") {
  const ProductSource src{load_source("bsc:0.1"), 8};
  const CodePair code = repair_decoder(make_code(src, 14, 4));
  const double exact = error_probability(src, code).value;
  const ErrorEstimate mc = error_probability_mc(src, code, 2024, 1'000'000);
  CHECK(mc.ci_half_width > 0.0);
  CHECK(mc.ci_half_width < 0.01);
  CHECK(std::fabs(mc.value - exact) <= mc.ci_half_width);
  CHECK_THROWS_AS(error_probability_mc(src, code, 1, 0), std::invalid_argument);
}

TEST_CASE("alpha grids span the requested window") {
  const SourceStats st = info_stats(load_source("bsc:0.1"));
  const auto grid = default_alpha_grid(st, 9);
  REQUIRE(grid.size() == 61);
  const double spread = 3.0 * std::sqrt(st.sigma2) * 3.0;
  CHECK(grid.front() == doctest::Approx(9 * st.h_cond - spread).epsilon(1e-12));
  CHECK(grid.back() == doctest::Approx(9 * st.h_cond + spread).epsilon(1e-12));
  CHECK(grid[30] == doctest::Approx(9 * st.h_cond).epsilon(1e-12));
}

TEST_CASE("converse bound pins the single-letter boundary case") {
  const JointPMF bsc = load_source("bsc:0.1");
  // at alpha = -ln(0.1) the tail is exactly 0.1 and the penalty m*e^{-alpha}
  // cancels it for m = 1
  const double alpha = -std::log(0.1);
  CHECK(converse_bound(bsc, 1, 1, {alpha}) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(converse_bound(bsc, 1, 1, {}), std::invalid_argument);
}

TEST_CASE("converse bound never contradicts achievable codes") {
  const JointPMF bsc = load_source("bsc:0.1");
  const SourceStats st = info_stats(bsc);
  for (int n = 1; n <= 4; ++n) {
    const std::uint64_t m = ProductSource{bsc, n}.x_tuple_count();
    // identity code achieves eps = 0, so the bound must stay <= 0
    CHECK(converse_bound(bsc, n, m, default_alpha_grid(st, n)) <= 1e-12);
  }
}

TEST_CASE("converse bound exceeds one half below the compression limit") {
  const JointPMF bsc = load_source("bsc:0.1");
  const SourceStats st = info_stats(bsc);
  const int n = 10;
  const double sigma = std::sqrt(st.sigma2);
  const auto m = static_cast<std::uint64_t>(
      std::ceil(std::exp(n * st.h_cond - 2.0 * std::sqrt(static_cast<double>(n)) * sigma)));
  CHECK(converse_bound(bsc, n, m, default_alpha_grid(st, n)) > 0.5);
}

TEST_CASE("every generated code respects the converse bound") {
  const JointPMF bsc = load_source("bsc:0.1");
  const SourceStats st = info_stats(bsc);
  for (int n = 1; n <= 6; ++n) {
    const ProductSource src{bsc, n};
    const auto grid = default_alpha_grid(st, n);
    for (const std::uint64_t m : {std::uint64_t{1}, std::uint64_t{2}, std::uint64_t{1} << n}) {
      const double bound = converse_bound(bsc, n, m, grid);
      for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const CodePair code = repair_decoder(make_code(src, m, seed));
        CHECK(error_probability(src, code).value >= bound - 1e-12);
      }
    }
  }
}

TEST_CASE("monte carlo converse tails approximate the exact bound") {
  const JointPMF bsc = load_source("bsc:0.1");
  const SourceStats st = info_stats(bsc);
  const auto grid = default_alpha_grid(st, 8);
  const double exact = converse_bound(bsc, 8, 14, grid);
  const double mc = converse_bound_mc(bsc, 8, 14, grid, 99, 200'000);
  CHECK(std::fabs(mc - exact) < 0.01);
}

TEST_CASE("second order rate formula") {
  CHECK(second_order_rate(3, 8, std::log(2.0)) == doctest::Approx(0.0).epsilon(1e-12));
  const double h = info_stats(load_source("bsc:0.1")).h_cond;
  // m = round(e^{nH + sqrt(n)}) puts the rate near 1
  const int n = 9;
  const auto m = static_cast<std::uint64_t>(
      std::llround(std::exp(n * h + std::sqrt(static_cast<double>(n)))));
  CHECK(second_order_rate(n, m, h) == doctest::Approx(1.0).epsilon(1e-3));
  // frozen arithmetic check of the closed form at n=9, m=64
  const double expected = (std::log(64.0) - 9.0 * h) / 3.0;
  CHECK(second_order_rate(9, 64, h) == doctest::Approx(expected).epsilon(1e-15));
  CHECK(second_order_rate(9, 64, h) == doctest::Approx(0.4110454).epsilon(1e-6));
  CHECK_THROWS_AS(second_order_rate(1, 0, 0.5), std::invalid_argument);
}

TEST_CASE("code manifests rebuild codes bit-exactly") {
  const ProductSource src{load_source("bsc:0.1"), 3};
  SUBCASE("seeded form") {
    const CodePair code = repair_decoder(make_code(src, 5, 42));
    std::stringstream ss;
    write_code_manifest(ss, code);
    const CodePair back = read_code_manifest(ss, src);
    CHECK(back.encoder.seed == code.encoder.seed);
    CHECK(back.decoder.map == code.decoder.map);
    CHECK(back.decoder.repaired == code.decoder.repaired);
  }
  SUBCASE("identity form") {
    const EncoderMap enc = identity_encoder(src.x_tuple_count(), 3);
    const CodePair code{enc, map_decoder(src, enc)};
    std::stringstream ss;
    write_code_manifest(ss, code);
    const CodePair back = read_code_manifest(ss, src);
    CHECK(back.encoder.form == EncoderForm::identity);
    CHECK(back.decoder.map == code.decoder.map);
  }
  SUBCASE("table form round-trips through a side file") {
    std::vector<std::uint32_t> table(src.x_tuple_count());
    Rng rng(7);
    for (auto& v : table) v = static_cast<std::uint32_t>(rng.next_u64() % 3);
    const EncoderMap enc = table_encoder(3, 3, std::move(table));
    const CodePair code{enc, map_decoder(src, enc)};
    const char* path = "manifest_table_tmp.txt";
    std::stringstream ss;
    write_code_manifest(ss, code, path);
    const CodePair back = read_code_manifest(ss, src);
    CHECK(back.encoder.table == code.encoder.table);
    CHECK(back.decoder.map == code.decoder.map);
    std::remove(path);
  }
  SUBCASE("missing keys are rejected") {
    std::stringstream ss;
    ss << "n=3\nm=5\n";
    CHECK_THROWS_AS(read_code_manifest(ss, src), std::invalid_argument);
  }
}
