#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace butterfly {

// Arbitrary-precision exact rational. Conversion from double is exact.
using Rational = boost::multiprecision::cpp_rational;

inline Rational make_rational(std::int64_t num, std::int64_t den) {
  return Rational(num, den);
}

inline std::string to_string(const Rational& q) { return q.str(); }

inline double to_double(const Rational& q) { return q.convert_to<double>(); }

// Square dense matrix with exact entries, row-major.
class RationalMatrix {
 public:
  RationalMatrix() = default;
  explicit RationalMatrix(std::size_t n) : n_(n), data_(n * n) {}

  std::size_t size() const noexcept { return n_; }
  Rational& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  const Rational& operator()(std::size_t i, std::size_t j) const {
    return data_[i * n_ + j];
  }

  static RationalMatrix identity(std::size_t n);
  static RationalMatrix uniform(std::size_t n);  // every entry 1/n

  RationalMatrix operator*(const RationalMatrix& rhs) const;
  bool operator==(const RationalMatrix& rhs) const = default;

  RationalMatrix transpose() const;

 private:
  std::size_t n_ = 0;
  std::vector<Rational> data_;
};

// Kronecker product of square matrices.
RationalMatrix kronecker(const RationalMatrix& a, const RationalMatrix& b);

}  // namespace butterfly
