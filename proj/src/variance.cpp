#include "butterfly/variance.hpp"

#include "butterfly/error.hpp"

namespace butterfly {

namespace {

// law((psi - law(psi))^2)
double centred_second_moment(std::span<const double> law, std::span<const double> psi) {
  const double mean = evaluate(law, psi);
  double out = 0.0;
  for (std::size_t x = 0; x < law.size(); ++x) out += law[x] * (psi[x] - mean) * (psi[x] - mean);
  return out;
}

}  // namespace

std::string to_string(VarianceFlavor flavor) {
  switch (flavor) {
    case VarianceFlavor::Bpf: return "bpf";
    case VarianceFlavor::Radix: return "radix";
    case VarianceFlavor::Mixed: return "mixed";
  }
  return "unknown";
}

VarianceRecursion::VarianceRecursion(const ExactFilter& ef, const FiniteHmm& hmm,
                                     VarianceFlavor flavor, std::size_t r)
    : ef_(ef), hmm_(hmm), flavor_(flavor) {
  require(!ef.predictor.empty(), ErrorCode::InvalidArgument, "empty exact filter");
  require(ef.predictor[0].size() == hmm.states(), ErrorCode::InvalidArgument,
          "exact filter does not match the model");
  const double rr = static_cast<double>(r);
  switch (flavor) {
    case VarianceFlavor::Bpf:
      filter_factor_ = 1.0;
      mutation_term_ = true;
      break;
    case VarianceFlavor::Radix:
      require(r >= 2, ErrorCode::InvalidArgument, "radix needs r >= 2");
      filter_factor_ = 1.0 - 1.0 / rr;
      mutation_term_ = false;
      break;
    case VarianceFlavor::Mixed:
      require(r >= 2, ErrorCode::InvalidArgument, "mixed radix needs r >= 2");
      filter_factor_ = 2.0 - 1.0 / rr;
      mutation_term_ = true;
      break;
  }
}

double VarianceRecursion::predicted(std::size_t n, std::span<const double> psi) const {
  require(n < ef_.predictor.size(), ErrorCode::OutOfRange, "step beyond horizon");
  require(psi.size() == hmm_.states(), ErrorCode::InvalidArgument, "function length differs from S");
  if (n == 0) return centred_second_moment(ef_.predictor[0], psi);
  const std::vector<double> f_psi = hmm_.apply_kernel(psi);
  double out = filtered(n - 1, f_psi);
  if (mutation_term_) {
    // pi^_{n-1}(f((psi - f psi)^2)): conditional variance of psi under f(x, .)
    const std::size_t s = hmm_.states();
    std::vector<double> local(s, 0.0);
    for (std::size_t x = 0; x < s; ++x) {
      for (std::size_t z = 0; z < s; ++z) {
        const double d = psi[z] - f_psi[x];
        local[x] += hmm_.transition()[x][z] * d * d;
      }
    }
    out += evaluate(ef_.filter[n - 1], local);
  }
  return out;
}

double VarianceRecursion::filtered(std::size_t n, std::span<const double> psi) const {
  require(n < ef_.filter.size(), ErrorCode::OutOfRange, "step beyond horizon");
  require(psi.size() == hmm_.states(), ErrorCode::InvalidArgument, "function length differs from S");
  const auto& filt = ef_.filter[n];
  double out = filter_factor_ * centred_second_moment(filt, psi);
  // The radix-r filter at n = 0 carries no initialization term: the initial
  // sampling error is of smaller order than the resampling error.
  if (flavor_ == VarianceFlavor::Radix && n == 0) return out;
  const double mean = evaluate(filt, psi);
  std::vector<double> arg(psi.size());
  for (std::size_t x = 0; x < psi.size(); ++x) arg[x] = ef_.g[n][x] * (psi[x] - mean);
  const double norm = ef_.normalizer[n];
  out += predicted(n, arg) / (norm * norm);
  return out;
}

namespace {

VarianceSeries series(const ExactFilter& ef, const FiniteHmm& hmm, std::span<const double> phi,
                      VarianceFlavor flavor, std::size_t r) {
  const VarianceRecursion rec(ef, hmm, flavor, r);
  VarianceSeries out;
  out.flavor = flavor;
  out.r = flavor == VarianceFlavor::Bpf ? 0 : r;
  for (std::size_t n = 0; n < ef.predictor.size(); ++n) {
    out.sigma_pred.push_back(rec.predicted(n, phi));
    out.sigma_filt.push_back(rec.filtered(n, phi));
  }
  return out;
}

}  // namespace

VarianceSeries bpf_variance(const ExactFilter& ef, const FiniteHmm& hmm, std::span<const double> phi) {
  return series(ef, hmm, phi, VarianceFlavor::Bpf, 0);
}

VarianceSeries radix_variance(const ExactFilter& ef, const FiniteHmm& hmm,
                              std::span<const double> phi, std::size_t r) {
  return series(ef, hmm, phi, VarianceFlavor::Radix, r);
}

VarianceSeries mixed_variance(const ExactFilter& ef, const FiniteHmm& hmm,
                              std::span<const double> phi, std::size_t r) {
  return series(ef, hmm, phi, VarianceFlavor::Mixed, r);
}

}  // namespace butterfly
