// Power divergence family: the convex functions phi_gamma generating the
// chi2_m (gamma=-1), KL_m / empirical likelihood (gamma=0), Hellinger
// (gamma=1/2), KL (gamma=1) and chi2 (gamma=2) divergences, plus arbitrary
// real gamma through the same closed forms.
//
// For gamma outside {0,1},
//     phi_gamma(x) = (x^gamma - gamma*x + gamma - 1) / (gamma*(gamma-1)),
// with the logarithmic limits phi_0(x) = -log x + x - 1 and
// phi_1(x) = x log x - x + 1. Functions that are undefined or non-convex on
// the negative axis are continued affinely from 0, which makes phi finite on
// all of R for gamma > 1 and +infinity on negatives otherwise. Derivatives
// obey phi'(x) = (x^{gamma-1} - 1)/(gamma - 1) and phi''(x) = x^{gamma-2},
// so phi''(1) = 1 for every member of the family.
//
// All endpoint values are IEEE infinities; no function here returns NaN.

#ifndef MEPHD_DIVERGENCE_HPP
#define MEPHD_DIVERGENCE_HPP

#include <string>

namespace mephd {

struct Divergence {
    double gamma = 2.0;
    // Effective domain (a, b) of phi, a < 1 < b; endpoints may be infinite.
    double domain_lo = 0.0;
    double domain_hi = 0.0;
    // Open interval Im(phi') over the strictly convex part of the domain.
    // The dual solver confines its iterates to this interval.
    double prime_lo = 0.0;
    double prime_hi = 0.0;
    double phi_second_at_one = 1.0;
};

struct PhiEval {
    double value;
    double first;
    double second;
};

struct ConjEval {
    double value;
    double first;   // = phi'^{-1}(u)
    double second;  // = 1 / phi''(phi'^{-1}(u))
};

struct RafValue {
    double gamma;
    double delta;
    double value;
};

Divergence make_power_divergence(double gamma);

// phi(x) with first and second derivatives; outside the domain the value is
// +infinity and the derivatives are the one-sided limits at the nearest
// domain endpoint.
PhiEval phi_eval(const Divergence& spec, double x);

// Inverse of phi' on the prime image. Throws DomainError outside.
double phi_prime_inverse(const Divergence& spec, double u);

// Fenchel conjugate phi*(u) = u phi'^{-1}(u) - phi(phi'^{-1}(u)) with its
// first two derivatives. Finite and smooth exactly on the prime image.
ConjEval conjugate_eval(const Divergence& spec, double u);

// Residual adjustment function A_gamma(delta) for Pearson residuals
// delta > -1; A_gamma''(0) = gamma.
RafValue raf_value(double gamma, double delta);

// CLI names: chi2m, klm, hellinger, kl, chi2, power:<gamma>.
Divergence divergence_by_name(const std::string& name);
std::string divergence_label(const Divergence& spec);

} // namespace mephd

#endif
