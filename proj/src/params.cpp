#include "isq/params.hpp"

#include <cmath>

namespace isq {

double kappa_of_sigma(double sigma) {
  if (!(sigma < 0.25)) throw InvalidArgument("sigma must be < 1/4");
  // 2 sigma / (1 + sqrt(1 - 4 sigma)) avoids cancellation near sigma = 0
  return 2.0 * sigma / (1.0 + std::sqrt(1.0 - 4.0 * sigma));
}

double default_p(double kappa) {
  if (!(kappa > -0.5 && kappa < 0.0)) throw InvalidArgument("kappa must lie in (-1/2, 0)");
  return kappa + 0.5;
}

StrengthParams StrengthParams::from_sigma(double sigma) {
  if (!(sigma > -0.75 && sigma < 0.0)) throw InvalidArgument("sigma must lie in (-3/4, 0)");
  StrengthParams s;
  s.sigma = sigma;
  s.kappa = kappa_of_sigma(sigma);
  s.p = default_p(s.kappa);
  return s;
}

StrengthParams StrengthParams::from_sigma_allow_zero(double sigma) {
  if (sigma == 0.0) {
    StrengthParams s;
    s.sigma = 0.0;
    s.kappa = 0.0;
    s.p = 0.5;
    return s;
  }
  return from_sigma(sigma);
}

void StrengthParams::validate() const {
  if (!(p > 0.0 && p < 0.5)) throw InvalidArgument("p must lie in (0, 1/2)");
  if (carleman_slack() < -1e-12) throw InvalidArgument("p^2 - 2p + sigma must be >= -3/4");
  if (!(beta1 > 0.0 && beta2 > 0.0)) throw InvalidArgument("Carleman offsets beta must be positive");
}

}  // namespace isq
