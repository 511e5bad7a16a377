#pragma once

// Asymptotic variance recursions for the BPF, radix-r and mixed radix-r
// particle filters, evaluated exactly against a finite-state filter.

#include "butterfly/hmm.hpp"

#include <span>
#include <string>
#include <vector>

namespace butterfly {

enum class VarianceFlavor { Bpf, Radix, Mixed };

std::string to_string(VarianceFlavor flavor);

struct VarianceSeries {
  VarianceFlavor flavor = VarianceFlavor::Bpf;
  std::size_t r = 0;  // 0 for Bpf
  std::vector<double> sigma_pred;  // n = 0..T
  std::vector<double> sigma_filt;
};

// One entry per step of the exact filter, n = 0..T.
VarianceSeries bpf_variance(const ExactFilter& ef, const FiniteHmm& hmm, std::span<const double> phi);
VarianceSeries radix_variance(const ExactFilter& ef, const FiniteHmm& hmm, std::span<const double> phi,
                              std::size_t r);
VarianceSeries mixed_variance(const ExactFilter& ef, const FiniteHmm& hmm, std::span<const double> phi,
                              std::size_t r);

// Recursion evaluated at an arbitrary function argument psi.
class VarianceRecursion {
 public:
  VarianceRecursion(const ExactFilter& ef, const FiniteHmm& hmm, VarianceFlavor flavor, std::size_t r);

  double predicted(std::size_t n, std::span<const double> psi) const;
  double filtered(std::size_t n, std::span<const double> psi) const;

 private:
  const ExactFilter& ef_;
  const FiniteHmm& hmm_;
  VarianceFlavor flavor_;
  double filter_factor_;
  bool mutation_term_;
};

}  // namespace butterfly
