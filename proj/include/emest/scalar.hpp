#ifndef EMEST_SCALAR_HPP
#define EMEST_SCALAR_HPP

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace emest {

// Parameters of the theoretical 1-d error profile f(alpha, n). `delta` is the
// failure probability the profile is quoted at (informational); `c_delta` and
// `polylog_exponent` are the leading constant and the power on log(n/alpha).
struct ErrorProfileConfig {
    double delta = 0.01;
    double c_delta = 1.0;
    int polylog_exponent = 1;
};

// Piecewise error bound for 1-d estimation with an alpha-fraction of inliers:
//   +inf                                   when alpha < c * log(n) / n
//   c * log(n/alpha)^p * n^(-3/2) / alpha^2     when alpha <= n^(-3/4)
//   c * log(n/alpha)^p * n^(-1/2) / alpha^(2/3) otherwise.
// Requires 0 < alpha < 1 and n >= 1.
double f_delta(double alpha, long n, const ErrorProfileConfig& cfg = {});

// Midpoint of the shortest closed interval containing k = ceil(alpha * n)
// samples. Ties broken toward the smallest left endpoint. Sorts a copy.
double shorth_midpoint(std::vector<double> samples, double alpha);

// Interface for pluggable 1-d location estimators.
class OneDEstimator {
public:
    virtual ~OneDEstimator() = default;
    virtual double estimate(std::span<const double> samples, double alpha) const = 0;
};

class ShorthEstimator final : public OneDEstimator {
public:
    double estimate(std::span<const double> samples, double alpha) const override;
};

#ifdef EMEST_ENABLE_TEST_ORACLES
// Test-only estimator that ignores the data and returns a fixed value, so
// higher-level logic can be exercised with a perfectly accurate (or
// deliberately wrong) 1-d answer. Compiled only into test targets.
class InjectedOracleEstimator final : public OneDEstimator {
public:
    explicit InjectedOracleEstimator(double value) : value_(value) {}
    double estimate(std::span<const double>, double) const override { return value_; }

private:
    double value_;
};
#endif

// Coordinate-wise application of a 1-d estimator to an n x d sample matrix.
Eigen::VectorXd naive_multivariate(const Eigen::MatrixXd& samples, double alpha,
                                   const OneDEstimator& estimator);

} // namespace emest

#endif
