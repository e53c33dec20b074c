#include "emest/scalar.hpp"

#include "emest/errors.hpp"
#include "emest/util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace emest {

double f_delta(double alpha, long n, const ErrorProfileConfig& cfg) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw ConfigError("f_delta: alpha must be in (0, 1)");
    }
    if (n < 1) throw ConfigError("f_delta: n must be >= 1");

    const double nd = static_cast<double>(n);
    if (alpha < cfg.c_delta * std::log(nd) / nd) {
        return std::numeric_limits<double>::infinity();
    }
    const double polylog =
        std::pow(std::log(nd / alpha), static_cast<double>(cfg.polylog_exponent));
    const double lead = cfg.c_delta * polylog;
    if (alpha <= std::pow(nd, -0.75)) {
        return lead * std::pow(nd, -1.5) / (alpha * alpha);
    }
    return lead / (std::sqrt(nd) * std::pow(alpha, 2.0 / 3.0));
}

double shorth_midpoint(std::vector<double> samples, double alpha) {
    if (samples.empty()) throw ConfigError("shorth: empty sample list");
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw ConfigError("shorth: alpha must be in (0, 1]");
    }
    std::sort(samples.begin(), samples.end());
    const long n = static_cast<long>(samples.size());
    const long k = std::clamp(ceil_count(alpha, n), 1L, n);

    // Slide a window of k consecutive order statistics; strict < keeps the
    // earliest (leftmost) window on ties.
    long best_left = 0;
    double best_len = std::numeric_limits<double>::infinity();
    for (long i = 0; i + k <= n; ++i) {
        const double len = samples[i + k - 1] - samples[i];
        if (len < best_len) {
            best_len = len;
            best_left = i;
        }
    }
    return 0.5 * (samples[best_left] + samples[best_left + k - 1]);
}

double ShorthEstimator::estimate(std::span<const double> samples, double alpha) const {
    return shorth_midpoint(std::vector<double>(samples.begin(), samples.end()), alpha);
}

Eigen::VectorXd naive_multivariate(const Eigen::MatrixXd& samples, double alpha,
                                   const OneDEstimator& estimator) {
    if (samples.rows() == 0 || samples.cols() == 0) {
        throw ConfigError("naive_multivariate: empty sample matrix");
    }
    const long n = samples.rows();
    const int d = static_cast<int>(samples.cols());
    Eigen::VectorXd out(d);
    std::vector<double> column(static_cast<std::size_t>(n));
    for (int j = 0; j < d; ++j) {
        for (long i = 0; i < n; ++i) column[static_cast<std::size_t>(i)] = samples(i, j);
        out(j) = estimator.estimate(column, alpha);
    }
    return out;
}

} // namespace emest
