#include "butterfly/rational.hpp"

namespace butterfly {

RationalMatrix RationalMatrix::identity(std::size_t n) {
  RationalMatrix out(n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1;
  return out;
}

RationalMatrix RationalMatrix::uniform(std::size_t n) {
  RationalMatrix out(n);
  const Rational w(1, static_cast<long long>(n));
  for (auto& x : out.data_) x = w;
  return out;
}

RationalMatrix RationalMatrix::operator*(const RationalMatrix& rhs) const {
  RationalMatrix out(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t l = 0; l < n_; ++l) {
      const Rational& a = (*this)(i, l);
      if (a == 0) continue;
      for (std::size_t j = 0; j < n_; ++j) {
        const Rational& b = rhs(l, j);
        if (b != 0) out(i, j) += a * b;
      }
    }
  }
  return out;
}

RationalMatrix RationalMatrix::transpose() const {
  RationalMatrix out(n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) out(j, i) = (*this)(i, j);
  return out;
}

RationalMatrix kronecker(const RationalMatrix& a, const RationalMatrix& b) {
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  RationalMatrix out(na * nb);
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < na; ++j) {
      if (a(i, j) == 0) continue;
      for (std::size_t p = 0; p < nb; ++p)
        for (std::size_t q = 0; q < nb; ++q) out(i * nb + p, j * nb + q) = a(i, j) * b(p, q);
    }
  return out;
}

}  // namespace butterfly
