#include "butterfly/graph.hpp"

#include "butterfly/error.hpp"

#include <algorithm>
#include <numeric>

namespace butterfly {

namespace {

std::size_t ipow(std::size_t base, std::size_t exp) {
  std::size_t out = 1;
  for (std::size_t e = 0; e < exp; ++e) out *= base;
  return out;
}

IndexSet full_range(std::size_t n) {
  IndexSet out(n);
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

void check_index(const Schedule& s, std::size_t i) {
  require(i < s.size(), ErrorCode::OutOfRange,
          "index " + std::to_string(i) + " outside population of " + std::to_string(s.size()));
}

void check_stage(const Schedule& s, std::size_t k, std::size_t lo) {
  require(k >= lo && k <= s.stages(), ErrorCode::OutOfRange,
          "stage " + std::to_string(k) + " outside [" + std::to_string(lo) + ", " +
              std::to_string(s.stages()) + "]");
}

}  // namespace

bool contains(const IndexSet& set, std::size_t i) {
  return std::binary_search(set.begin(), set.end(), i);
}

IndexSet parent_set(const Schedule& s, std::size_t k, std::size_t i) {
  check_stage(s, k, 1);
  check_index(s, i);
  const std::size_t r = s.radix();
  IndexSet out;
  switch (s.family()) {
    case Family::Multinomial:
      return full_range(s.size());
    case Family::Radix: {
      const std::size_t inner = ipow(r, k - 1);
      const std::size_t block = inner * r;
      for (std::size_t q = 0; q < r; ++q) out.push_back(i % inner + q * inner + block * (i / block));
      return out;
    }
    case Family::MixedRadix: {
      const std::size_t c = s.width();
      if (k == 1) {
        for (std::size_t q = 0; q < c; ++q) out.push_back(c * (i / c) + q);
      } else {
        for (std::size_t q = 0; q < r; ++q) out.push_back(i % c + q * c);
      }
      return out;
    }
  }
  return out;
}

IndexSet prime_parent_set(const Schedule& s, std::size_t k, std::size_t i) {
  check_stage(s, k, 0);
  check_index(s, i);
  if (k == 0) return {i};
  IndexSet out;
  switch (s.family()) {
    case Family::Multinomial:
      return full_range(s.size());
    case Family::Radix: {
      const std::size_t span = ipow(s.radix(), k);
      const std::size_t base = span * (i / span);
      for (std::size_t q = 0; q < span; ++q) out.push_back(base + q);
      return out;
    }
    case Family::MixedRadix: {
      if (k == 2) return full_range(s.size());
      const std::size_t c = s.width();
      for (std::size_t q = 0; q < c; ++q) out.push_back(c * (i / c) + q);
      return out;
    }
  }
  return out;
}

IndexSet collision_start_set(const Schedule& s, std::size_t k, std::size_t i) {
  check_stage(s, k, 1);
  const IndexSet now = prime_parent_set(s, k, i);
  const IndexSet before = prime_parent_set(s, k - 1, i);
  IndexSet out;
  std::set_difference(now.begin(), now.end(), before.begin(), before.end(), std::back_inserter(out));
  return out;
}

IndexSet tail_product_set(const Schedule& s, std::size_t k, std::size_t i) {
  check_stage(s, k, 1);
  check_index(s, i);
  IndexSet out;
  switch (s.family()) {
    case Family::Multinomial:
      return full_range(s.size());
    case Family::Radix: {
      const std::size_t stride = ipow(s.radix(), s.stages() - k);
      const std::size_t count = ipow(s.radix(), k);
      for (std::size_t q = 0; q < count; ++q) out.push_back(i % stride + q * stride);
      return out;
    }
    case Family::MixedRadix: {
      if (k == 2) return full_range(s.size());
      const std::size_t c = s.width();
      for (std::size_t q = 0; q < s.radix(); ++q) out.push_back(i % c + q * c);
      return out;
    }
  }
  return out;
}

std::uint64_t path_count_from(const Schedule& s, std::size_t k, std::size_t u) {
  check_stage(s, k, 0);
  check_index(s, u);
  std::uint64_t count = 1;
  for (std::size_t q = k + 1; q <= s.stages(); ++q) count *= s.row_count(q);
  return count;
}

CollisionCounts collision_cardinalities(const Schedule& s, std::size_t i, std::size_t j) {
  check_index(s, i);
  check_index(s, j);
  require(i != j, ErrorCode::InvalidArgument, "collision cardinalities need i != j");
  const std::uint64_t n = s.size();
  CollisionCounts out;
  for (std::size_t k = 1; k <= s.stages(); ++k) {
    if (!contains(collision_start_set(s, k, i), j)) continue;
    const std::uint64_t lower = path_count_from(s, k, i);
    const std::uint64_t shared = lower * lower * prime_parent_set(s, k, i).size();
    out.colliding += shared;
    out.non_colliding += n * n - shared;
  }
  return out;
}

EdgeStats edge_stats(const Schedule& s) {
  const std::uint64_t n = s.size();
  EdgeStats out;
  switch (s.family()) {
    case Family::Multinomial:
      out.incoming_per_stage = {s.size()};
      out.total_edges = n * n;
      break;
    case Family::Radix:
      out.incoming_per_stage.assign(s.stages(), s.radix());
      out.total_edges = s.radix() * n * s.stages();
      break;
    case Family::MixedRadix:
      out.incoming_per_stage = {s.size() / s.radix(), s.radix()};
      out.total_edges = s.radix() * n + n * n / s.radix();
      break;
  }
  return out;
}

EdgeStats count_edges(const Schedule& s) {
  EdgeStats out;
  for (std::size_t k = 1; k <= s.stages(); ++k) {
    std::size_t per_vertex = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::size_t c = stage_row(s, k, i).entries.size();
      per_vertex = std::max(per_vertex, c);
      out.total_edges += c;
    }
    out.incoming_per_stage.push_back(per_vertex);
  }
  return out;
}

Partition build_partition(const Schedule& s, std::size_t d) {
  require(s.family() != Family::Multinomial, ErrorCode::InvalidArgument,
          "no partition family is defined for the multinomial schedule");
  check_stage(s, d, 1);
  const std::size_t r = s.radix();
  std::size_t n_blocks = 0;
  switch (s.family()) {
    case Family::Radix: n_blocks = ipow(r, s.stages() - d + 1); break;
    case Family::MixedRadix: n_blocks = s.width() * ipow(r, 2 - d); break;
    case Family::Multinomial: break;
  }
  const std::size_t per_block = ipow(r, d - 1);
  Partition part;
  part.d = d;
  part.block_size = per_block;
  part.blocks.resize(n_blocks);
  for (std::size_t u = 0; u < n_blocks; ++u)
    for (std::size_t q = 0; q < per_block; ++q) part.blocks[u].push_back(u + q * n_blocks);
  return part;
}

bool partition_structure_holds(const Schedule& s, const Partition& part) {
  const std::size_t n = s.size();
  if (part.d < 1 || part.d > s.stages() || part.blocks.empty()) return false;
  if (n % part.blocks.size() != 0) return false;
  const std::size_t size = n / part.blocks.size();
  if (size < part.d) return false;
  std::vector<char> seen(n, 0);
  for (const auto& block : part.blocks) {
    if (block.size() != size) return false;
    for (std::size_t i : block) {
      if (i >= n || seen[i]) return false;
      seen[i] = 1;
    }
  }
  if (n > kDenseCap) return true;
  std::vector<std::size_t> order;
  for (std::size_t t = 0; t < part.d; ++t) order.push_back(s.stages() - t);
  for (const auto& block : part.blocks) {
    const SparseRow first = product_row(s, block.front(), order);
    for (std::size_t t = 1; t < block.size(); ++t) {
      const SparseRow other = product_row(s, block[t], order);
      if (other.size() != first.size()) return false;
      for (std::size_t e = 0; e < first.size(); ++e)
        if (other[e].column != first[e].column || other[e].weight != first[e].weight) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// SupportOracle

SupportOracle::SupportOracle(const Schedule& s)
    : n_(s.size()), m_(s.stages()), words_((s.size() + 63) / 64) {
  require(n_ <= kDenseCap, ErrorCode::CapacityExceeded,
          "support oracle is limited to N <= " + std::to_string(kDenseCap));
  BoolMatrix identity(n_, Bits(words_, 0));
  for (std::size_t i = 0; i < n_; ++i) identity[i][i / 64] |= std::uint64_t{1} << (i % 64);

  stage_.assign(m_ + 1, {});
  children_.assign(m_ + 1, {});
  for (std::size_t k = 1; k <= m_; ++k) {
    const RationalMatrix a = dense_stage(s, k);
    BoolMatrix support(n_, Bits(words_, 0));
    children_[k].assign(n_, {});
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j)
        if (a(i, j) != 0) {
          support[i][j / 64] |= std::uint64_t{1} << (j % 64);
          children_[k][j].push_back(i);
        }
    stage_[k] = std::move(support);
  }
  prefix_.assign(m_ + 1, {});
  tail_.assign(m_ + 1, {});
  prefix_[0] = identity;
  tail_[0] = identity;
  for (std::size_t k = 1; k <= m_; ++k) {
    prefix_[k] = multiply(stage_[k], prefix_[k - 1]);
    tail_[k] = multiply(tail_[k - 1], stage_[m_ - k + 1]);
  }
}

SupportOracle::BoolMatrix SupportOracle::multiply(const BoolMatrix& a, const BoolMatrix& b) const {
  BoolMatrix out(n_, Bits(words_, 0));
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t l = 0; l < n_; ++l)
      if ((a[i][l / 64] >> (l % 64)) & 1U)
        for (std::size_t w = 0; w < words_; ++w) out[i][w] |= b[l][w];
  return out;
}

IndexSet SupportOracle::row_set(const BoolMatrix& mat, std::size_t i) const {
  require(i < n_, ErrorCode::OutOfRange, "index out of range");
  IndexSet out;
  for (std::size_t j = 0; j < n_; ++j)
    if ((mat[i][j / 64] >> (j % 64)) & 1U) out.push_back(j);
  return out;
}

IndexSet SupportOracle::parent_set(std::size_t k, std::size_t i) const {
  require(k >= 1 && k <= m_, ErrorCode::OutOfRange, "stage out of range");
  return row_set(stage_[k], i);
}

IndexSet SupportOracle::prime_parent_set(std::size_t k, std::size_t i) const {
  require(k <= m_, ErrorCode::OutOfRange, "stage out of range");
  return row_set(prefix_[k], i);
}

IndexSet SupportOracle::collision_start_set(std::size_t k, std::size_t i) const {
  require(k >= 1 && k <= m_, ErrorCode::OutOfRange, "stage out of range");
  const IndexSet now = prime_parent_set(k, i);
  const IndexSet before = prime_parent_set(k - 1, i);
  IndexSet out;
  std::set_difference(now.begin(), now.end(), before.begin(), before.end(), std::back_inserter(out));
  return out;
}

IndexSet SupportOracle::tail_product_set(std::size_t k, std::size_t i) const {
  require(k >= 1 && k <= m_, ErrorCode::OutOfRange, "stage out of range");
  return row_set(tail_[k], i);
}

std::uint64_t SupportOracle::enumerate_paths_from(std::size_t k, std::size_t u) const {
  require(k <= m_ && u < n_, ErrorCode::OutOfRange, "path start out of range");
  std::vector<std::vector<std::size_t>> paths;
  paths_from(k, u, paths);
  return paths.size();
}

void SupportOracle::paths_from(std::size_t k, std::size_t u,
                               std::vector<std::vector<std::size_t>>& out) const {
  std::vector<std::size_t> path{u};
  // explicit depth-first enumeration
  std::vector<std::size_t> cursor{0};
  while (!cursor.empty()) {
    const std::size_t depth = path.size() - 1;  // current stage = k + depth
    if (k + depth == m_) {
      out.push_back(path);
      if (out.size() > kPathPairCap)
        fail(ErrorCode::CapacityExceeded, "path enumeration exceeds cap");
      path.pop_back();
      cursor.pop_back();
      continue;
    }
    const auto& next = children_[k + depth + 1][path.back()];
    std::size_t& c = cursor.back();
    if (c == next.size()) {
      path.pop_back();
      cursor.pop_back();
      continue;
    }
    path.push_back(next[c++]);
    cursor.push_back(0);
  }
}

CollisionCounts SupportOracle::enumerate_collision_pairs(std::size_t i, std::size_t j) const {
  require(i < n_ && j < n_, ErrorCode::OutOfRange, "index out of range");
  require(i != j, ErrorCode::InvalidArgument, "collision enumeration needs i != j");
  std::vector<std::vector<std::size_t>> from_i, from_j;
  paths_from(0, i, from_i);
  paths_from(0, j, from_j);
  require(static_cast<double>(from_i.size()) * static_cast<double>(from_j.size()) <=
              static_cast<double>(kPathPairCap),
          ErrorCode::CapacityExceeded, "path pair enumeration exceeds cap");
  CollisionCounts out;
  for (const auto& a : from_i)
    for (const auto& b : from_j) {
      bool collide = false;
      for (std::size_t k = 1; k <= m_ && !collide; ++k) collide = a[k] == b[k];
      if (collide)
        ++out.colliding;
      else
        ++out.non_colliding;
    }
  return out;
}

}  // namespace butterfly

namespace butterfly {

Partition singleton_partition(std::size_t n) {
  Partition part;
  part.d = 1;
  part.block_size = 1;
  part.blocks.resize(n);
  for (std::size_t i = 0; i < n; ++i) part.blocks[i] = {i};
  return part;
}

}  // namespace butterfly
