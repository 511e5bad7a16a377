#include "butterfly/schedule.hpp"

#include "butterfly/error.hpp"

#include <algorithm>
#include <sstream>
#include <tuple>

namespace butterfly {

namespace {

std::size_t checked_pow(std::size_t base, std::size_t exp) {
  std::size_t out = 1;
  for (std::size_t e = 0; e < exp; ++e) {
    if (out > kMaxParticles / base + 1) fail(ErrorCode::CapacityExceeded, "population size overflow");
    out *= base;
  }
  return out;
}

std::size_t ipow(std::size_t base, std::size_t exp) {
  std::size_t out = 1;
  for (std::size_t e = 0; e < exp; ++e) out *= base;
  return out;
}

void check_capacity(std::size_t n) {
  require(n <= kMaxParticles, ErrorCode::CapacityExceeded,
          "population size " + std::to_string(n) + " exceeds capacity " +
              std::to_string(kMaxParticles));
}

bool same_row(const SparseRow& a, const SparseRow& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t t = 0; t < a.size(); ++t)
    if (a[t].column != b[t].column || a[t].weight != b[t].weight) return false;
  return true;
}

}  // namespace

std::string to_string(Family family) {
  switch (family) {
    case Family::Multinomial: return "multinomial";
    case Family::Radix: return "radix";
    case Family::MixedRadix: return "mixed";
  }
  return "unknown";
}

Family parse_family(const std::string& name) {
  if (name == "multinomial" || name == "bpf") return Family::Multinomial;
  if (name == "radix") return Family::Radix;
  if (name == "mixed" || name == "mixed-radix" || name == "mixed_radix") return Family::MixedRadix;
  fail(ErrorCode::InvalidArgument, "unknown family '" + name + "'");
}

Schedule Schedule::multinomial(std::size_t n) {
  require(n >= 1, ErrorCode::InvalidArgument, "multinomial schedule needs N >= 1");
  check_capacity(n);
  return Schedule(Family::Multinomial, 0, n, n, 1);
}

Schedule Schedule::radix(std::size_t r, std::size_t m) {
  require(r >= 2, ErrorCode::InvalidArgument, "radix schedule needs r >= 2");
  require(m >= 1, ErrorCode::InvalidArgument, "radix schedule needs m >= 1");
  const std::size_t n = checked_pow(r, m);
  check_capacity(n);
  return Schedule(Family::Radix, r, m, n, m);
}

Schedule Schedule::mixed_radix(std::size_t r, std::size_t c) {
  require(r >= 2, ErrorCode::InvalidArgument, "mixed radix schedule needs r >= 2");
  require(c >= 1, ErrorCode::InvalidArgument, "mixed radix schedule needs c >= 1");
  require(c <= kMaxParticles, ErrorCode::CapacityExceeded, "c too large");
  check_capacity(r * c);
  return Schedule(Family::MixedRadix, r, c, r * c, 2);
}

void Schedule::check_stage(std::size_t k) const {
  require(k >= 1 && k <= m_, ErrorCode::OutOfRange,
          "stage " + std::to_string(k) + " outside [1, " + std::to_string(m_) + "]");
}

StageClass Schedule::stage_class(std::size_t k, std::size_t i) const {
  check_stage(k);
  require(i < n_, ErrorCode::OutOfRange,
          "index " + std::to_string(i) + " outside population of " + std::to_string(n_));
  switch (family_) {
    case Family::Multinomial:
      return {0, 1, n_};
    case Family::Radix: {
      // floor(i / r^k) == floor(j / r^k) and i mod r^(k-1) == j mod r^(k-1)
      const std::size_t inner = ipow(r_, k - 1);
      const std::size_t block = inner * r_;
      return {(i / block) * block + i % inner, inner, r_};
    }
    case Family::MixedRadix: {
      const std::size_t c = width_;
      if (k == 1) return {(i / c) * c, 1, c};
      return {i % c, c, r_};
    }
  }
  fail(ErrorCode::InvalidArgument, "unknown family");
}

std::size_t Schedule::row_count(std::size_t k) const {
  check_stage(k);
  switch (family_) {
    case Family::Multinomial: return n_;
    case Family::Radix: return r_;
    case Family::MixedRadix: return k == 1 ? width_ : r_;
  }
  return 0;
}

void Schedule::for_each_class(std::size_t k, const std::function<void(const StageClass&)>& fn) const {
  visit_classes(k, fn);
}

std::string Schedule::describe() const {
  std::ostringstream os;
  switch (family_) {
    case Family::Multinomial: os << "multinomial(N=" << n_ << ")"; break;
    case Family::Radix: os << "radix(r=" << r_ << ",m=" << width_ << ",N=" << n_ << ")"; break;
    case Family::MixedRadix: os << "mixed(r=" << r_ << ",c=" << width_ << ",N=" << n_ << ")"; break;
  }
  return os.str();
}

StageRow stage_row(const Schedule& s, std::size_t k, std::size_t i) {
  const StageClass cls = s.stage_class(k, i);
  StageRow row{k, i, {}};
  row.entries.reserve(cls.count);
  const Rational w(1, static_cast<long long>(cls.count));
  for (std::size_t q = 0; q < cls.count; ++q) row.entries.push_back({cls.member(q), w});
  return row;
}

RationalMatrix dense_stage(const Schedule& s, std::size_t k) {
  require(s.size() <= kDenseCap, ErrorCode::CapacityExceeded,
          "dense stage matrices are limited to N <= " + std::to_string(kDenseCap));
  require(k >= 1 && k <= s.stages(), ErrorCode::OutOfRange, "stage out of range");
  const std::size_t r = s.radix();
  switch (s.family()) {
    case Family::Multinomial:
      return RationalMatrix::uniform(s.size());
    case Family::Radix: {
      const std::size_t m = s.stages();
      // I_{r^(m-k)} (x) 1_{1/r} (x) I_{r^(k-1)}
      return kronecker(kronecker(RationalMatrix::identity(ipow(r, m - k)), RationalMatrix::uniform(r)),
                       RationalMatrix::identity(ipow(r, k - 1)));
    }
    case Family::MixedRadix: {
      const std::size_t c = s.width();
      // I_{r^(2-k)} (x) 1_{1/(r^(k-1) c^(2-k))} (x) I_{c^(k-1)}
      return kronecker(
          kronecker(RationalMatrix::identity(ipow(r, 2 - k)),
                    RationalMatrix::uniform(ipow(r, k - 1) * ipow(c, 2 - k))),
          RationalMatrix::identity(ipow(c, k - 1)));
    }
  }
  fail(ErrorCode::InvalidArgument, "unknown family");
}

SparseRow multiply_row(const Schedule& s, const SparseRow& x, std::size_t k) {
  std::vector<Rational> acc(s.size());
  std::vector<char> touched(s.size(), 0);
  for (const auto& [j, w] : x) {
    const StageClass cls = s.stage_class(k, j);
    const Rational a(1, static_cast<long long>(cls.count));
    const Rational wa = w * a;
    for (std::size_t q = 0; q < cls.count; ++q) {
      const std::size_t l = cls.member(q);
      acc[l] += wa;
      touched[l] = 1;
    }
  }
  SparseRow out;
  for (std::size_t l = 0; l < s.size(); ++l)
    if (touched[l] && acc[l] != 0) out.push_back({l, std::move(acc[l])});
  return out;
}

SparseRow product_row(const Schedule& s, std::size_t i, const std::vector<std::size_t>& stage_order) {
  require(i < s.size(), ErrorCode::OutOfRange, "row index out of range");
  SparseRow x{{i, Rational(1)}};
  for (std::size_t k : stage_order) x = multiply_row(s, x, k);
  return x;
}

std::vector<std::pair<std::size_t, double>> tail_product_row(const Schedule& s, std::size_t d,
                                                             std::size_t i) {
  require(d >= 1 && d <= s.stages(), ErrorCode::OutOfRange, "tail length out of range");
  require(i < s.size(), ErrorCode::OutOfRange, "row index out of range");
  const std::size_t n = s.size();
  std::vector<double> cur(n, 0.0);
  std::vector<std::size_t> support{i};
  cur[i] = 1.0;
  for (std::size_t t = 0; t < d; ++t) {
    const std::size_t k = s.stages() - t;
    std::vector<double> next(n, 0.0);
    std::vector<char> touched(n, 0);
    std::vector<std::size_t> next_support;
    for (std::size_t j : support) {
      const StageClass cls = s.stage_class(k, j);
      const double wa = cur[j] / static_cast<double>(cls.count);
      for (std::size_t q = 0; q < cls.count; ++q) {
        const std::size_t l = cls.member(q);
        next[l] += wa;
        if (!touched[l]) {
          touched[l] = 1;
          next_support.push_back(l);
        }
      }
    }
    std::sort(next_support.begin(), next_support.end());
    cur = std::move(next);
    support = std::move(next_support);
  }
  std::vector<std::pair<std::size_t, double>> out;
  out.reserve(support.size());
  for (std::size_t l : support) out.emplace_back(l, cur[l]);
  return out;
}

AssumptionReport verify_assumptions(const Schedule& s) {
  const std::size_t n = s.size();
  const std::size_t m = s.stages();
  AssumptionReport report;

  report.double_stochastic = true;
  report.equal_row_counts = true;
  report.symmetric = true;
  std::vector<std::vector<std::vector<std::size_t>>> columns(m + 1);
  for (std::size_t k = 1; k <= m; ++k) {
    std::vector<Rational> column_sums(n);
    std::vector<std::tuple<std::size_t, std::size_t, Rational>> entries;
    columns[k].assign(n, {});
    const std::size_t expected = stage_row(s, k, 0).entries.size();
    for (std::size_t i = 0; i < n; ++i) {
      const StageRow row = stage_row(s, k, i);
      if (row.entries.size() != expected) report.equal_row_counts = false;
      Rational sum = 0;
      for (const auto& e : row.entries) {
        if (e.weight <= 0) report.double_stochastic = false;
        sum += e.weight;
        column_sums[e.column] += e.weight;
        entries.emplace_back(i, e.column, e.weight);
        columns[k][e.column].push_back(i);
      }
      if (sum != 1) report.double_stochastic = false;
    }
    for (const auto& cs : column_sums)
      if (cs != 1) report.double_stochastic = false;

    auto transposed = entries;
    for (auto& [a, b, w] : transposed) std::swap(a, b);
    std::sort(transposed.begin(), transposed.end());
    std::sort(entries.begin(), entries.end());
    if (transposed != entries) report.symmetric = false;
  }

  report.idempotent = true;
  for (std::size_t k = 1; k <= m && report.idempotent; ++k)
    for (std::size_t i = 0; i < n; ++i)
      if (!same_row(product_row(s, i, {k, k}), stage_row(s, k, i).entries)) {
        report.idempotent = false;
        break;
      }

  report.commuting = true;
  for (std::size_t p = 1; p <= m && report.commuting; ++p)
    for (std::size_t q = p + 1; q <= m && report.commuting; ++q)
      for (std::size_t i = 0; i < n; ++i)
        if (!same_row(product_row(s, i, {p, q}), product_row(s, i, {q, p}))) {
          report.commuting = false;
          break;
        }

  report.product_uniform = true;
  {
    std::vector<std::size_t> order(m);
    for (std::size_t k = 0; k < m; ++k) order[k] = k + 1;
    const Rational u(1, static_cast<long long>(n));
    for (std::size_t i = 0; i < n && report.product_uniform; ++i) {
      const SparseRow row = product_row(s, i, order);
      if (row.size() != n) report.product_uniform = false;
      for (const auto& e : row)
        if (e.weight != u) report.product_uniform = false;
    }
  }

  // At most one directed path between any two vertices: propagate path
  // counts from every vertex at every stage.
  constexpr double kPathWorkCap = 1e8;
  const double work = static_cast<double>(n) * static_cast<double>(n) * static_cast<double>(m) *
                      static_cast<double>(m);
  if (work <= kPathWorkCap) {
    report.unique_paths_checked = true;
    report.unique_paths = true;
    for (std::size_t p = 0; p < m && report.unique_paths; ++p) {
      for (std::size_t start = 0; start < n && report.unique_paths; ++start) {
        std::vector<std::uint64_t> cur(n, 0);
        cur[start] = 1;
        for (std::size_t q = p + 1; q <= m && report.unique_paths; ++q) {
          std::vector<std::uint64_t> next(n, 0);
          for (std::size_t j = 0; j < n; ++j) {
            if (cur[j] == 0) continue;
            // edges (j at stage q-1) -> (l at stage q) where A_q^{l j} != 0
            for (std::size_t l : columns[q][j]) next[l] += cur[j];
          }
          for (auto c : next)
            if (c > 1) report.unique_paths = false;
          cur = std::move(next);
        }
      }
    }
  }
  return report;
}

}  // namespace butterfly
