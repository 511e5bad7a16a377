#pragma once

// Conditional-independence graph combinatorics for augmented resampling.
//
// Vertex (k, i) is particle i after stage k. There is an edge
// (k-1, j) -> (k, i) whenever A_k^{ij} != 0. A path from u is a sequence
// (u = j_0, j_1, ..., j_m) following those edges.

#include "butterfly/schedule.hpp"

#include <cstdint>
#include <vector>

namespace butterfly {

// Sorted, deduplicated particle indices.
using IndexSet = std::vector<std::size_t>;

bool contains(const IndexSet& set, std::size_t i);

// Closed forms (congruence characterizations).
IndexSet parent_set(const Schedule& s, std::size_t k, std::size_t i);        // P_k(i), k in [1, m]
IndexSet prime_parent_set(const Schedule& s, std::size_t k, std::size_t i);  // K_k(i), k in [0, m]
IndexSet collision_start_set(const Schedule& s, std::size_t k, std::size_t i);  // K_k \ K_{k-1}
IndexSet tail_product_set(const Schedule& s, std::size_t k, std::size_t i);     // Q_{m,k}(i)

// |L_k(u)|: number of directed paths from stage k to stage m starting at u.
std::uint64_t path_count_from(const Schedule& s, std::size_t k, std::size_t u);

struct CollisionCounts {
  std::uint64_t colliding = 0;      // m_A(i, j)
  std::uint64_t non_colliding = 0;  // m~_A(i, j)

  bool operator==(const CollisionCounts&) const = default;
};

// Closed-form counts of pairs of full paths from (i, j) that share (or never
// share) a vertex at some stage k >= 1. Requires i != j.
CollisionCounts collision_cardinalities(const Schedule& s, std::size_t i, std::size_t j);

struct EdgeStats {
  // incoming_per_stage[k - 1]: incoming edges of each vertex on graph row k
  std::vector<std::size_t> incoming_per_stage;
  std::uint64_t total_edges = 0;
};

// Table formulas: multinomial (N, N^2), radix (r, rN log_r N),
// mixed (N/r then r, rN + N^2/r).
EdgeStats edge_stats(const Schedule& s);
// Same statistics counted from the stage rows.
EdgeStats count_edges(const Schedule& s);

struct Partition {
  std::size_t d = 1;
  std::vector<IndexSet> blocks;
  std::size_t block_size = 1;
};

// Radix: I_u = {u + q r^(m-d+1) : q < r^(d-1)}, u < r^(m-d+1).
// Mixed: I_u = {u + q c r^(2-d) : q < r^(d-1)}, u < c r^(2-d).
Partition build_partition(const Schedule& s, std::size_t d);

// Block sizes equal and >= d, and rows of A_m ... A_{m-d+1} identical inside
// each block.
bool partition_structure_holds(const Schedule& s, const Partition& part);

// Brute-force oracles computed from the Kronecker-expanded dense matrices
// (N <= kDenseCap) or by explicit path enumeration. They share no code with
// the closed forms above.
class SupportOracle {
 public:
  explicit SupportOracle(const Schedule& s);

  IndexSet parent_set(std::size_t k, std::size_t i) const;
  IndexSet prime_parent_set(std::size_t k, std::size_t i) const;
  IndexSet collision_start_set(std::size_t k, std::size_t i) const;
  IndexSet tail_product_set(std::size_t k, std::size_t i) const;

  std::uint64_t enumerate_paths_from(std::size_t k, std::size_t u) const;
  // Enumerates all path pairs from (i, j); collision means i_k == j_k for
  // some k in [1, m].
  CollisionCounts enumerate_collision_pairs(std::size_t i, std::size_t j) const;

  std::size_t size() const noexcept { return n_; }
  std::size_t stages() const noexcept { return m_; }

 private:
  using Bits = std::vector<std::uint64_t>;
  using BoolMatrix = std::vector<Bits>;

  BoolMatrix multiply(const BoolMatrix& a, const BoolMatrix& b) const;
  IndexSet row_set(const BoolMatrix& mat, std::size_t i) const;
  void paths_from(std::size_t k, std::size_t u, std::vector<std::vector<std::size_t>>& out) const;

  std::size_t n_;
  std::size_t m_;
  std::size_t words_;
  std::vector<BoolMatrix> stage_;     // stage_[k] support of A_k, k in [1, m]
  std::vector<BoolMatrix> prefix_;    // prefix_[k] support of A_k ... A_1
  std::vector<BoolMatrix> tail_;      // tail_[k] support of A_m ... A_{m-k+1}
  std::vector<std::vector<std::vector<std::size_t>>> children_;  // children_[k][j]: l with A_k^{lj} != 0
};

inline constexpr std::uint64_t kPathPairCap = 10'000'000;

}  // namespace butterfly

namespace butterfly {

// {{0}, {1}, ..., {N-1}} with d = 1; valid for every schedule.
Partition singleton_partition(std::size_t n);

}  // namespace butterfly
