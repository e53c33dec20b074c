#include "emest/subspace.hpp"

#include "emest/errors.hpp"
#include "emest/rng.hpp"

#include <cmath>

namespace emest {

RejectionOutcome rejection_sample(const Eigen::MatrixXd& samples,
                                  const Eigen::VectorXd& center, std::uint64_t seed) {
    const long n = samples.rows();
    const int d = static_cast<int>(samples.cols());
    if (n == 0) throw ConfigError("rejection_sample: empty sample matrix");
    if (center.size() != d) throw ConfigError("rejection_sample: center dimension mismatch");

    RejectionOutcome out;
    out.probabilities.resize(static_cast<std::size_t>(n));
    // Counter-based coin flips: sample i's draw depends only on (seed, i), so
    // the accepted set is independent of traversal order.
    const std::uint64_t stream = rng::derive(seed, "acceptance");
    for (long i = 0; i < n; ++i) {
        const double dist2 = (samples.row(i).transpose() - center).squaredNorm();
        const double p = std::exp(-dist2 / static_cast<double>(d));
        out.probabilities[static_cast<std::size_t>(i)] = p;
        if (rng::uniform_unit_at(stream, static_cast<std::uint64_t>(i)) < p) {
            out.accepted.push_back(i);
        }
    }
    return out;
}

ConditionalGaussian conditional_params(const Eigen::MatrixXd& sigma,
                                       const Eigen::VectorXd& mu,
                                       const Eigen::VectorXd& center) {
    const int d = static_cast<int>(mu.size());
    if (sigma.rows() != d || sigma.cols() != d || center.size() != d) {
        throw ConfigError("conditional_params: dimension mismatch");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("conditional_params: covariance is singular or indefinite");
    }
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXd sigma_inv = llt.solve(identity);
    const double two_over_d = 2.0 / static_cast<double>(d);

    Eigen::LLT<Eigen::MatrixXd> llt_post(sigma_inv + two_over_d * identity);
    if (llt_post.info() != Eigen::Success) {
        throw NumericalError("conditional_params: posterior precision not positive definite");
    }
    ConditionalGaussian out;
    out.sigma_tilde = llt_post.solve(identity);
    out.mu_tilde = out.sigma_tilde * (two_over_d * center + sigma_inv * mu);
    return out;
}

Eigen::VectorXd expected_bias(const std::vector<ConditionalGaussian>& conditionals,
                              const Eigen::VectorXd& mu, const Eigen::VectorXd& center) {
    if (conditionals.empty()) throw ConfigError("expected_bias: empty conditional list");
    const int d = static_cast<int>(mu.size());
    Eigen::MatrixXd avg_sigma = Eigen::MatrixXd::Zero(d, d);
    for (const ConditionalGaussian& c : conditionals) {
        if (c.sigma_tilde.rows() != d) {
            throw ConfigError("expected_bias: dimension mismatch");
        }
        avg_sigma += c.sigma_tilde;
    }
    avg_sigma /= static_cast<double>(conditionals.size());
    return (2.0 / static_cast<double>(d)) * (avg_sigma * (center - mu));
}

double acceptance_probability_oracle(const Eigen::MatrixXd& sigma,
                                     const Eigen::VectorXd& mu,
                                     const Eigen::VectorXd& center) {
    const int d = static_cast<int>(mu.size());
    if (sigma.rows() != d || sigma.cols() != d || center.size() != d) {
        throw ConfigError("acceptance_probability_oracle: dimension mismatch");
    }
    if (!sigma.isApprox(sigma.transpose(), 1e-9)) {
        throw ConfigError("acceptance_probability_oracle: covariance not symmetric");
    }
    // PSD check via the smallest eigenvalue; singular covariances are fine
    // here (the formula only inverts I + (2/d) sigma).
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma,
                                                      Eigen::EigenvaluesOnly);
    const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() < -1e-9 * scale) {
        throw ConfigError("acceptance_probability_oracle: covariance not PSD");
    }

    const double two_over_d = 2.0 / static_cast<double>(d);
    const Eigen::MatrixXd a =
        Eigen::MatrixXd::Identity(d, d) + two_over_d * sigma;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("acceptance_probability_oracle: shifted matrix not SPD");
    }
    double log_det = 0.0;
    for (int i = 0; i < d; ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
    const Eigen::VectorXd m = mu - center;
    const double quad = m.dot(llt.solve(m)) / static_cast<double>(d);
    return std::exp(-0.5 * log_det - quad);
}

SubspaceSplit find_subspace(const Eigen::VectorXd& center,
                            const Eigen::MatrixXd& accepted) {
    const int d = static_cast<int>(center.size());
    if (d < 2 || d % 2 != 0) {
        throw ConfigError("find_subspace: dimension must be even and >= 2");
    }
    const long k = accepted.rows();
    if (k == 0) throw EmptyAcceptanceError("find_subspace: empty accepted set");
    if (accepted.cols() != d) throw ConfigError("find_subspace: dimension mismatch");

    const Eigen::MatrixXd centered = accepted.rowwise() - center.transpose();
    Eigen::MatrixXd m = centered.transpose() * centered / static_cast<double>(k);
    m = 0.5 * (m + m.transpose()); // enforce exact symmetry before decomposing

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success) {
        throw NumericalError("find_subspace: eigendecomposition failed");
    }

    // The solver reports eigenvalues ascending; flip to the descending
    // convention used throughout.
    const int half = d / 2;
    SubspaceSplit out;
    out.eigenvalues.resize(d);
    out.p_high.resize(half, d);
    out.p_low.resize(half, d);
    for (int i = 0; i < d; ++i) {
        out.eigenvalues(i) = es.eigenvalues()(d - 1 - i);
    }
    for (int i = 0; i < half; ++i) {
        out.p_high.row(i) = es.eigenvectors().col(d - 1 - i).transpose();
        out.p_low.row(i) = es.eigenvectors().col(half - 1 - i).transpose();
    }
    return out;
}

PartialEstimateResult partial_estimate(const Eigen::VectorXd& center,
                                       const Eigen::MatrixXd& samples,
                                       std::uint64_t seed) {
    const int d = static_cast<int>(center.size());
    if (d < 2 || d % 2 != 0) {
        throw ConfigError("partial_estimate: dimension must be even and >= 2");
    }
    if (samples.cols() != d) throw ConfigError("partial_estimate: dimension mismatch");

    PartialEstimateResult out;
    out.rejection = rejection_sample(samples, center, seed);
    out.accept_count = static_cast<long>(out.rejection.accepted.size());
    if (out.accept_count == 0) {
        throw EmptyAcceptanceError("partial_estimate: rejection step accepted no samples");
    }

    Eigen::MatrixXd accepted(out.accept_count, d);
    for (long i = 0; i < out.accept_count; ++i) {
        accepted.row(i) = samples.row(out.rejection.accepted[static_cast<std::size_t>(i)]);
    }
    out.split = find_subspace(center, accepted);
    out.trace = out.split.eigenvalues.sum();

    const Eigen::VectorXd mean = accepted.colwise().mean().transpose();
    out.mu_low = out.split.p_low.transpose() * (out.split.p_low * mean);
    return out;
}

} // namespace emest
