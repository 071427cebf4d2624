#include "mephd/divergence.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>

#include "mephd/errors.hpp"

namespace mephd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// x^gamma is defined and convex on the whole real line exactly for even
// integer exponents >= 2; those members need no affine continuation.
bool convex_on_reals(double gamma) {
    if (gamma < 2.0) return gamma == 2.0;
    return gamma == std::floor(gamma) && std::fmod(gamma, 2.0) == 0.0;
}

} // namespace

Divergence make_power_divergence(double gamma) {
    Divergence d;
    d.gamma = gamma;
    d.phi_second_at_one = 1.0;
    if (convex_on_reals(gamma)) {
        d.domain_lo = -kInf;
        d.domain_hi = kInf;
        d.prime_lo = -kInf;
        d.prime_hi = kInf;
    } else if (gamma > 1.0) {
        // Affine continuation with slope phi'(0+) = -1/(gamma-1) keeps phi
        // finite on negatives but phi' saturates there.
        d.domain_lo = -kInf;
        d.domain_hi = kInf;
        d.prime_lo = -1.0 / (gamma - 1.0);
        d.prime_hi = kInf;
    } else if (gamma == 1.0) {
        d.domain_lo = 0.0;
        d.domain_hi = kInf;
        d.prime_lo = -kInf;
        d.prime_hi = kInf;
    } else {
        // gamma < 1: phi'(x) -> 1/(1-gamma) as x -> +inf.
        d.domain_lo = 0.0;
        d.domain_hi = kInf;
        d.prime_lo = -kInf;
        d.prime_hi = 1.0 / (1.0 - gamma);
    }
    return d;
}

PhiEval phi_eval(const Divergence& spec, double x) {
    const double g = spec.gamma;

    if (std::isinf(x)) {
        if (x > 0.0) {
            const double first = (g < 1.0) ? 1.0 / (1.0 - g) : kInf;
            const double second = (g < 2.0) ? 0.0 : (g == 2.0 ? 1.0 : kInf);
            return {kInf, first, second};
        }
        if (convex_on_reals(g)) return {kInf, -kInf, kInf};
        if (g > 1.0) return {kInf, -1.0 / (g - 1.0), 0.0};
        return {kInf, -kInf, kInf};
    }

    if (g == 0.0) {
        if (x > 0.0) return {-std::log(x) + x - 1.0, 1.0 - 1.0 / x, 1.0 / (x * x)};
        return {kInf, -kInf, kInf};
    }
    if (g == 1.0) {
        if (x > 0.0) return {x * std::log(x) - x + 1.0, std::log(x), 1.0 / x};
        if (x == 0.0) return {1.0, -kInf, kInf};
        return {kInf, -kInf, kInf};
    }

    const double gg = g * (g - 1.0);
    if (x > 0.0) {
        const double value = (std::pow(x, g) - g * x + g - 1.0) / gg;
        const double first = (std::pow(x, g - 1.0) - 1.0) / (g - 1.0);
        const double second = std::pow(x, g - 2.0);
        return {value, first, second};
    }
    if (x == 0.0) {
        const double value = (g > 0.0) ? 1.0 / g : kInf;
        const double first = (g > 1.0) ? -1.0 / (g - 1.0) : -kInf;
        double second;
        if (g < 2.0) second = kInf;
        else if (g == 2.0) second = 1.0;
        else second = 0.0;
        return {value, first, second};
    }
    // x < 0
    if (convex_on_reals(g)) {
        // Even integer exponent: the natural formula applies on negatives.
        const double value = (std::pow(x, g) - g * x + g - 1.0) / gg;
        const double first = (std::pow(x, g - 1.0) - 1.0) / (g - 1.0);
        const double second = std::pow(x, g - 2.0);
        return {value, first, second};
    }
    if (g > 1.0) {
        // Affine continuation from 0.
        const double slope = -1.0 / (g - 1.0);
        return {1.0 / g + slope * x, slope, 0.0};
    }
    return {kInf, -kInf, kInf};
}

double phi_prime_inverse(const Divergence& spec, double u) {
    if (!(u > spec.prime_lo && u < spec.prime_hi))
        throw DomainError("phi_prime_inverse: argument outside Im(phi')");
    const double g = spec.gamma;
    if (g == 0.0) return 1.0 / (1.0 - u);
    if (g == 1.0) return std::exp(u);
    const double base = 1.0 + (g - 1.0) * u;
    if (base > 0.0) return std::pow(base, 1.0 / (g - 1.0));
    // Reachable only for even integer gamma, where gamma-1 is odd.
    if (base == 0.0) return 0.0;
    return -std::pow(-base, 1.0 / (g - 1.0));
}

ConjEval conjugate_eval(const Divergence& spec, double u) {
    const double g = spec.gamma;
    // Closed forms for the named members; these sit in the innermost solver
    // loop, so avoid generic pow where sqrt/exp/log suffice.
    if (g == 2.0) return {u * (1.0 + 0.5 * u), 1.0 + u, 1.0};
    if (g == 1.0) {
        const double e = std::exp(u);
        return {e - 1.0, e, e};
    }
    if (g == 0.0) {
        if (!(u < 1.0)) throw DomainError("conjugate_eval: argument outside Im(phi')");
        const double r = 1.0 / (1.0 - u);
        return {-std::log1p(-u), r, r * r};
    }
    if (g == 0.5) {
        const double b = 1.0 - 0.5 * u;
        if (!(b > 0.0)) throw DomainError("conjugate_eval: argument outside Im(phi')");
        const double r = 1.0 / b;
        return {u * r, r * r, r * r * r};
    }
    if (g == -1.0) {
        const double b = 1.0 - 2.0 * u;
        if (!(b > 0.0)) throw DomainError("conjugate_eval: argument outside Im(phi')");
        const double s = std::sqrt(b);
        return {1.0 - s, 1.0 / s, 1.0 / (b * s)};
    }
    const double x = phi_prime_inverse(spec, u); // throws outside Im(phi')
    const double value = u * x - phi_eval(spec, x).value;
    double second;
    if (x > 0.0) second = std::pow(x, 2.0 - g);
    else if (x == 0.0) second = (g < 2.0) ? 0.0 : (g == 2.0 ? 1.0 : kInf);
    else second = std::pow(x, 2.0 - g); // even integer gamma only
    return {value, x, second};
}

RafValue raf_value(double gamma, double delta) {
    if (!(delta > -1.0)) throw DomainError("raf_value: delta must exceed -1");
    double value;
    if (gamma == 1.0) value = -std::log1p(delta);
    else value = (std::pow(delta + 1.0, 1.0 - gamma) - 1.0) / (gamma - 1.0);
    return {gamma, delta, value};
}

Divergence divergence_by_name(const std::string& name) {
    if (name == "chi2m") return make_power_divergence(-1.0);
    if (name == "klm") return make_power_divergence(0.0);
    if (name == "hellinger") return make_power_divergence(0.5);
    if (name == "kl") return make_power_divergence(1.0);
    if (name == "chi2") return make_power_divergence(2.0);
    if (name.rfind("power:", 0) == 0) {
        const std::string arg = name.substr(6);
        char* end = nullptr;
        const double g = std::strtod(arg.c_str(), &end);
        if (end == arg.c_str() || *end != '\0')
            throw Error("bad divergence gamma: " + arg);
        return make_power_divergence(g);
    }
    throw Error("unknown divergence: " + name +
                " (expected chi2m|klm|hellinger|kl|chi2|power:<gamma>)");
}

std::string divergence_label(const Divergence& spec) {
    const double g = spec.gamma;
    if (g == -1.0) return "chi2m";
    if (g == 0.0) return "klm";
    if (g == 0.5) return "hellinger";
    if (g == 1.0) return "kl";
    if (g == 2.0) return "chi2";
    std::ostringstream os;
    os << "power:" << g;
    return os.str();
}

} // namespace mephd
