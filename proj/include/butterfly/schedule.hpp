#pragma once

// Matrix families parameterizing augmented resampling.
//
// Indices are 0-based throughout the library: particle i here is particle
// i + 1 in the 1-based notation used by external interfaces. Stages are
// numbered 1..m; stage 0 denotes the input population.
//
// Every built-in family has stage matrices whose rows are arithmetic
// progressions of columns with equal weights, so a row is fully described by
// a StageClass. Rows in the same class are identical.

#include "butterfly/rational.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace butterfly {

enum class Family { Multinomial, Radix, MixedRadix };

std::string to_string(Family family);
Family parse_family(const std::string& name);

inline constexpr std::size_t kMaxParticles = std::size_t{1} << 22;
// Dense (Kronecker-expanded) matrices and the oracles built on them.
inline constexpr std::size_t kDenseCap = 256;

// Columns {start + q * stride : q < count}, each with weight 1 / count.
struct StageClass {
  std::size_t start = 0;
  std::size_t stride = 1;
  std::size_t count = 1;

  std::size_t member(std::size_t q) const noexcept { return start + q * stride; }
};

struct StageEntry {
  std::size_t column = 0;
  Rational weight;
};

struct StageRow {
  std::size_t stage = 0;
  std::size_t row = 0;
  std::vector<StageEntry> entries;  // ascending column order
};

class Schedule {
 public:
  static Schedule multinomial(std::size_t n);
  static Schedule radix(std::size_t r, std::size_t m);
  static Schedule mixed_radix(std::size_t r, std::size_t c);

  Family family() const noexcept { return family_; }
  // r for the butterfly families, 0 for multinomial.
  std::size_t radix() const noexcept { return r_; }
  // m for radix, c for mixed radix, N for multinomial.
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return n_; }
  std::size_t stages() const noexcept { return m_; }

  // Non-zero pattern of row i of A_k, computed from the modular congruence
  // characterization.
  StageClass stage_class(std::size_t k, std::size_t i) const;

  // Number of non-zeros in every row of A_k.
  std::size_t row_count(std::size_t k) const;

  // Visits one StageClass per equivalence class of A_k (class leaders in
  // ascending order).
  void for_each_class(std::size_t k, const std::function<void(const StageClass&)>& fn) const;

  // Same traversal, inlined for the sampling hot loop.
  template <class Fn>
  void visit_classes(std::size_t k, Fn&& fn) const {
    check_stage(k);
    switch (family_) {
      case Family::Multinomial:
        fn(StageClass{0, 1, n_});
        return;
      case Family::Radix: {
        std::size_t inner = 1;
        for (std::size_t e = 1; e < k; ++e) inner *= r_;
        const std::size_t block = inner * r_;
        for (std::size_t b = 0; b < n_; b += block)
          for (std::size_t o = 0; o < inner; ++o) fn(StageClass{b + o, inner, r_});
        return;
      }
      case Family::MixedRadix:
        if (k == 1) {
          for (std::size_t b = 0; b < n_; b += width_) fn(StageClass{b, 1, width_});
        } else {
          for (std::size_t o = 0; o < width_; ++o) fn(StageClass{o, width_, r_});
        }
        return;
    }
  }

  std::string describe() const;

 private:
  Schedule(Family family, std::size_t r, std::size_t width, std::size_t n, std::size_t m)
      : family_(family), r_(r), width_(width), n_(n), m_(m) {}

  void check_stage(std::size_t k) const;

  Family family_;
  std::size_t r_;
  std::size_t width_;
  std::size_t n_;
  std::size_t m_;
};

StageRow stage_row(const Schedule& s, std::size_t k, std::size_t i);

// A_k built by expanding its Kronecker-product definition; independent of
// the congruence rule used by stage_row. Requires N <= kDenseCap.
RationalMatrix dense_stage(const Schedule& s, std::size_t k);

struct AssumptionReport {
  bool double_stochastic = false;
  bool product_uniform = false;
  bool symmetric = false;
  bool commuting = false;
  bool idempotent = false;
  bool equal_row_counts = false;
  bool unique_paths = false;
  // false when the path-uniqueness check was skipped for size reasons
  bool unique_paths_checked = false;

  bool all() const noexcept {
    return double_stochastic && product_uniform && symmetric && commuting && idempotent &&
           equal_row_counts && unique_paths;
  }
};

// Exact checks by sparse rational row/column accumulation.
AssumptionReport verify_assumptions(const Schedule& s);

// Sparse rational row vector helpers used by the verification code and the
// oracles that need products of stage matrices.
using SparseRow = std::vector<StageEntry>;
// x^T A_k
SparseRow multiply_row(const Schedule& s, const SparseRow& x, std::size_t k);
// Row i of A_{k_1} A_{k_2} ... A_{k_j} for the listed stage order.
SparseRow product_row(const Schedule& s, std::size_t i, const std::vector<std::size_t>& stage_order);

// Row i of A_m A_{m-1} ... A_{m-d+1}, in double precision.
std::vector<std::pair<std::size_t, double>> tail_product_row(const Schedule& s, std::size_t d,
                                                             std::size_t i);

}  // namespace butterfly
