// Asymptotic tests built on the projected-divergence machinery, and the
// chi-square distribution utilities they need.
//
//   fit statistic at fixed theta : (2n/phi''(1)) * sup_t P_n m(theta,t), df l
//   model test                   : same at the minimizing theta, df l - d
//   simple parameter test        : scaled gap between a hypothesized theta
//                                  and the optimum, df d
//   composite parameter test     : gap between a restricted optimum
//                                  theta = f(beta) and the full one, df d - k
//
// Confidence regions collect the thetas whose fit statistic stays below the
// chi-square(l) quantile.

#ifndef MEPHD_INFERENCE_HPP
#define MEPHD_INFERENCE_HPP

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "mephd/divergence.hpp"
#include "mephd/dual_solver.hpp"
#include "mephd/estimator.hpp"
#include "mephd/model.hpp"

namespace mephd {

// Regularized lower incomplete gamma based CDF, accurate to ~1e-12.
double chi2_cdf(int df, double x);
double chi2_quantile(int df, double p);

struct TestReport {
    double statistic = 0.0;
    int df = 0;
    double p_value = 1.0;
    double alpha = 0.05;
    double critical_value = 0.0;
    bool reject = false;
    std::optional<double> h1_sigma2; // plug-in variance of the statistic under H1
};

TestReport fit_statistic_at_theta(const MomentModel& model, const Divergence& spec,
                                  const Sample& sample, const std::vector<double>& theta,
                                  double alpha, const SolverConfig& config = {});

// Requires l > d; throws DegreesOfFreedomError otherwise.
TestReport model_test(const MomentModel& model, const Divergence& spec,
                      const Sample& sample, double alpha, const SolverConfig& config = {});

TestReport simple_test(const MomentModel& model, const Divergence& spec,
                       const Sample& sample, const std::vector<double>& theta1,
                       double alpha, const SolverConfig& config = {});

struct CompositeHypothesis {
    // theta = f(beta), beta in R^{d-k}; the Jacobian is optional and only
    // used when supplied (the restricted search is derivative-free).
    std::function<std::vector<double>(const std::vector<double>&)> f;
    std::function<la::Mat(const std::vector<double>&)> f_jac; // may be empty
    std::vector<std::pair<double, double>> beta_box;
};

// raw_statistic suppresses the 2n/phi''(1) normalization applied by default.
TestReport composite_test(const MomentModel& model, const Divergence& spec,
                          const Sample& sample, const CompositeHypothesis& hyp,
                          double alpha, const SolverConfig& config = {},
                          bool raw_statistic = false);

struct GridSpec {
    std::vector<double> lo;
    std::vector<double> hi;
    std::vector<int> steps; // points per axis, >= 2
};

struct ConfidenceRegion {
    double level = 0.95;
    std::vector<std::vector<double>> theta_grid;
    std::vector<bool> inside;
    std::vector<bool> solver_failed; // failed points are marked outside
    // d = 1 only: disjoint closed intervals, boundaries refined by bisection.
    std::vector<std::pair<double, double>> intervals;
};

// Grid statistics are pure per point and evaluated by `jobs` workers; the
// result is deterministic for any worker count.
ConfidenceRegion confidence_region(const MomentModel& model, const Divergence& spec,
                                   const Sample& sample, double level,
                                   const GridSpec& grid, const SolverConfig& config = {},
                                   int jobs = 1);

} // namespace mephd

#endif
