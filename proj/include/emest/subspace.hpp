#ifndef EMEST_SUBSPACE_HPP
#define EMEST_SUBSPACE_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace emest {

// Result of distance-based rejection sampling around a center c: sample i is
// kept with probability exp(-||x_i - c||^2 / d).
struct RejectionOutcome {
    std::vector<long> accepted;      // indices into the input, ascending
    std::vector<double> probabilities; // acceptance probability per input row
};

RejectionOutcome rejection_sample(const Eigen::MatrixXd& samples,
                                  const Eigen::VectorXd& center, std::uint64_t seed);

// Law of a N(mu, sigma) draw conditioned on surviving the rejection step:
// another Gaussian with
//   sigma_tilde = (sigma^{-1} + (2/d) I)^{-1}
//   mu_tilde    = sigma_tilde ((2/d) c + sigma^{-1} mu).
struct ConditionalGaussian {
    Eigen::VectorXd mu_tilde;
    Eigen::MatrixXd sigma_tilde;
};

ConditionalGaussian conditional_params(const Eigen::MatrixXd& sigma,
                                       const Eigen::VectorXd& mu,
                                       const Eigen::VectorXd& center);

// Mean of the conditional means minus mu; equals (2/d) * avg(sigma_tilde) *
// (c - mu) exactly, which the tests verify against the direct average.
Eigen::VectorXd expected_bias(const std::vector<ConditionalGaussian>& conditionals,
                              const Eigen::VectorXd& mu, const Eigen::VectorXd& center);

// Closed-form acceptance probability E[exp(-||x - c||^2 / d)] for
// x ~ N(mu, sigma):  det(I + (2/d) sigma)^{-1/2} *
// exp(-(1/d) (mu-c)^T (I + (2/d) sigma)^{-1} (mu-c)). Accepts singular PSD
// sigma. Serves as the independent check for the empirical acceptance rate.
double acceptance_probability_oracle(const Eigen::MatrixXd& sigma,
                                     const Eigen::VectorXd& mu,
                                     const Eigen::VectorXd& center);

// Eigendecomposition split of the empirical second-moment matrix around a
// center. Eigenvalues are reported in descending order; p_high stacks the top
// d/2 eigenvectors as rows, p_low the bottom d/2 (both in that same order).
struct SubspaceSplit {
    Eigen::MatrixXd p_high; // (d/2) x d
    Eigen::MatrixXd p_low;  // (d/2) x d
    Eigen::VectorXd eigenvalues; // length d, descending
};

// Requires even d >= 2 and a nonempty accepted set.
SubspaceSplit find_subspace(const Eigen::VectorXd& center,
                            const Eigen::MatrixXd& accepted);

// One filtering level: rejection-sample around the center, split the
// second-moment spectrum of the survivors, and read off the mean on the
// low-variance half (returned lifted back to the ambient dimension).
struct PartialEstimateResult {
    SubspaceSplit split;
    Eigen::VectorXd mu_low;     // ambient d-vector, lives in the span of p_low
    long accept_count = 0;
    double trace = 0.0;         // trace of the second-moment matrix
    RejectionOutcome rejection;
};

PartialEstimateResult partial_estimate(const Eigen::VectorXd& center,
                                       const Eigen::MatrixXd& samples,
                                       std::uint64_t seed);

} // namespace emest

#endif
