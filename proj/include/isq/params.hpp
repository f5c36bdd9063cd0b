#pragma once

#include <stdexcept>
#include <string>

namespace isq {

// Raised for any out-of-range input; the message names the offending field.
struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Root of sigma = kappa (1 - kappa) with kappa < 1/2.
double kappa_of_sigma(double sigma);

// p = kappa + 1/2, the exponent that saturates p^2 - 2p + sigma >= -3/4.
double default_p(double kappa);

struct StrengthParams {
  double sigma = -0.5;
  double kappa = 0.0;
  double p = 0.0;
  double beta1 = 1.0;
  double beta2 = 1.0;

  // Builds the bundle for sigma in (-3/4, 0) with p = kappa + 1/2.
  static StrengthParams from_sigma(double sigma);
  // Same, but sigma = 0 is also accepted (kappa = 0, p = 1/2); used by regression paths.
  static StrengthParams from_sigma_allow_zero(double sigma);

  // Checks 0 < p < 1/2 and p^2 - 2p + sigma >= -3/4 (with roundoff slack).
  void validate() const;
  double carleman_slack() const { return p * p - 2.0 * p + sigma + 0.75; }
};

}  // namespace isq
