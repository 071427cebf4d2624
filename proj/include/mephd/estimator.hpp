// Outer minimization over theta of the projected divergence profile
// theta -> sup_t P_n m(theta, t), yielding the minimum empirical
// phi-divergence estimate together with plug-in asymptotic covariances and
// the weighted distribution-function estimate.
//
// The population covariances being estimated:
//   V = ( J^T Omega^{-1} J )^{-1},  J = P_0 dg/dtheta,  Omega = P_0 g g^T
//   U = B - B K^T V K B,            B = diag(0, Omega^{-1}),  K = [0_d | J^T]
// (the phi''(1)^2 factor is 1 for every power divergence, which this library
// normalizes to), and the sandwich S^{-1} M S^{-1} for misspecified models.

#ifndef MEPHD_ESTIMATOR_HPP
#define MEPHD_ESTIMATOR_HPP

#include <optional>
#include <vector>

#include "mephd/divergence.hpp"
#include "mephd/dual_solver.hpp"
#include "mephd/linalg.hpp"
#include "mephd/model.hpp"

namespace mephd {

struct ProfilePoint {
    std::vector<double> theta;
    double value;     // +inf when the inner solve failed
    bool converged;
};

struct EstimationResult {
    std::vector<double> theta_hat;
    std::vector<double> c_hat;          // multipliers at theta_hat
    double value = 0.0;                 // min_theta sup_t P_n m(theta, t)
    std::vector<double> weights;
    la::Mat variance_theta;             // d x d plug-in V
    la::Mat variance_c;                 // (l+1) x (l+1) plug-in U
    std::optional<la::Mat> misspec_cov; // (l+1+d) square sandwich, on request
    std::vector<ProfilePoint> profile_trace;
    std::vector<double> profile_grad;   // envelope gradient P_n dm/dtheta at the optimum
};

struct CdfEstimate {
    double x;
    double value;           // weighted F-hat
    double variance;        // plug-in W(x)
    double empirical_value; // F_n
};

std::vector<double> default_theta_init(const MomentModel& model, const Sample& sample);

// d = 1: 41-point scan of the theta box (plus the init point), golden-section
// refinement of the best bracket to 1e-8, inner solves warm-started from the
// neighboring multipliers. d >= 2: Nelder-Mead on the profile from
// theta_init. Grid points whose inner solve fails count as +inf. Throws
// NoFeasibleThetaError when every evaluation fails.
EstimationResult estimate(const MomentModel& model, const Divergence& spec,
                          const Sample& sample, const SolverConfig& config = {},
                          const std::vector<double>* theta_init = nullptr);

// Plug-in covariances at a fixed theta (usually theta_hat). Throw
// SingularMatrixError on rank-deficient moment matrices.
la::Mat variance_theta(const MomentModel& model, const Sample& sample,
                       const std::vector<double>& theta_hat);
la::Mat variance_c(const MomentModel& model, const Sample& sample,
                   const std::vector<double>& theta_hat);

// Sandwich covariance of (c_hat, theta_hat), valid with or without the model
// containing the sampling distribution.
la::Mat misspec_covariance(const MomentModel& model, const Divergence& spec,
                           const Sample& sample, const std::vector<double>& theta_hat,
                           const std::vector<double>& c_hat);

// Weighted CDF estimate at the given abscissae (obs_dim must be 1), with the
// plug-in asymptotic variance; `empirical_value` carries F_n alongside.
std::vector<CdfEstimate> cdf_estimate(const MomentModel& model,
                                      const EstimationResult& result,
                                      const Sample& sample,
                                      const std::vector<double>& xs);

} // namespace mephd

#endif
