#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "skaudit/source_core.hpp"

namespace skaudit {

enum class EncoderForm { seeded, table, identity };

// Total function from x-tuple indices to key symbols {0..m-1}. The seeded
// form never materializes a table: bin(x) = mix64(mix64(x) ^ seed) mod m.
struct EncoderMap {
  EncoderForm form = EncoderForm::seeded;
  int n = 1;
  std::uint64_t m = 1;
  std::uint64_t domain_size = 0;  // |X|^n
  std::uint64_t seed = 0;         // seeded form only
  std::vector<std::uint32_t> table;  // table form only; table[x] < m

  std::uint64_t apply(std::uint64_t x_index) const;
};

EncoderMap random_binning(std::uint64_t domain_size, int n, std::uint64_t m,
                          std::uint64_t seed);
// The one constructor guaranteed bijective (m = domain_size, s = x).
EncoderMap identity_encoder(std::uint64_t domain_size, int n);
EncoderMap table_encoder(int n, std::uint64_t m, std::vector<std::uint32_t> table);

// Decoder table: (key symbol, z-tuple index) -> reconstructed x-tuple index.
// `repaired` records that the consistency pass ran: for every s with a
// nonempty encoder preimage, encoder(decode(s, z)) == s at all z.
struct Decoder {
  int n = 1;
  std::uint64_t m = 1;
  std::uint64_t z_count = 0;
  bool repaired = false;
  std::vector<std::uint64_t> map;

  std::uint64_t decode(std::uint64_t s, std::uint64_t z) const {
    return map[s * z_count + z];
  }
};

struct CodePair {
  EncoderMap encoder;
  Decoder decoder;
};

// Maximum-likelihood decoding within each bin: decode(s, z) maximizes
// P(x^n | z^n) over encoder preimages of s, ties broken toward the smallest
// x-tuple index. Bins with an empty preimage decode to index 0 and must be
// treated as unreachable (no encoder output ever equals such s).
Decoder map_decoder(const ProductSource& source, const EncoderMap& encoder);
Decoder map_decoder(const JointPMF& tuple_joint, int n, const EncoderMap& encoder);

// Consistency repair: wherever encoder(decode(s, z)) != s and bin s is
// nonempty, redirect to the smallest preimage of s. Error probability never
// increases, because every tuple in bin s was already decoded wrongly there.
CodePair repair_decoder(const CodePair& code);

struct ErrorEstimate {
  double value = 0.0;
  double ci_half_width = 0.0;  // 0 in exact mode; 99% normal CI in MC mode
};

// Exact decoding-error probability: total mass of {(x, z): decode(encode(x), z) != x}.
ErrorEstimate error_probability(const ProductSource& source, const CodePair& code);
ErrorEstimate error_probability(const JointPMF& tuple_joint, int n, const CodePair& code);
// Unbiased Monte Carlo frequency estimate with a 99% confidence half-width.
ErrorEstimate error_probability_mc(const ProductSource& source, const CodePair& code,
                                   std::uint64_t seed, std::uint64_t trials);

// Evenly spaced alpha grid spanning n*h +- 3*sigma*sqrt(n).
std::vector<double> default_alpha_grid(const SourceStats& stats, int n, int points = 61);

// Code-independent lower bound on the error probability of ANY (n, m) code:
// sup over the grid of [Pr{W_n >= alpha} - m * e^{-alpha}], with the tail
// evaluated exactly over information-density level compositions.
double converse_bound(const JointPMF& base, int n, std::uint64_t m,
                      const std::vector<double>& alpha_grid,
                      std::uint64_t max_terms = 5'000'000);
// Same bound with the tail estimated from sampled W_n values (for n past the
// exact-enumeration budget). The result is then an estimate, not a certificate.
double converse_bound_mc(const JointPMF& base, int n, std::uint64_t m,
                         const std::vector<double>& alpha_grid, std::uint64_t seed,
                         std::uint64_t trials);

// (ln m - n * h_cond) / sqrt(n), in nats.
double second_order_rate(int n, std::uint64_t m, double h_cond);

// Text manifest (key=value) sufficient to rebuild the code bit-exactly:
// n, m, encoder form, seed or table file, decoder mode, repaired flag.
// Table-form encoders write their table to `table_path` (required non-empty).
void write_code_manifest(std::ostream& out, const CodePair& code,
                         const std::string& table_path = "");
CodePair read_code_manifest(std::istream& in, const ProductSource& source);

}  // namespace skaudit
