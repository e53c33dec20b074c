#include "emest/tournament.hpp"

#include "emest/errors.hpp"
#include "emest/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace emest {

namespace {

Eigen::MatrixXd subsample_rows(const Eigen::MatrixXd& samples, long cap,
                               std::mt19937_64& eng) {
    const long n = samples.rows();
    if (cap <= 0 || cap >= n) return samples;
    std::vector<long> order(n);
    std::iota(order.begin(), order.end(), 0L);
    std::shuffle(order.begin(), order.end(), eng);
    Eigen::MatrixXd out(cap, samples.cols());
    for (long i = 0; i < cap; ++i) out.row(i) = samples.row(order[i]);
    return out;
}

} // namespace

TournamentOutcome tournament_select(const CandidateList& candidates,
                                    const Eigen::MatrixXd& samples, double alpha,
                                    const OneDEstimator& estimator, double f_bound,
                                    long sample_cap, std::uint64_t seed) {
    const int k = static_cast<int>(candidates.size());
    if (k == 0) throw ConfigError("tournament: empty candidate list");
    if (samples.rows() == 0) throw ConfigError("tournament: empty sample matrix");
    const int d = static_cast<int>(samples.cols());
    for (const Eigen::VectorXd& c : candidates) {
        if (c.size() != d) throw ConfigError("tournament: candidate dimension mismatch");
    }
    if (!(f_bound >= 0.0)) throw ConfigError("tournament: f_bound must be >= 0");

    auto eng = rng::engine(seed, "tournament_subsample");
    const Eigen::MatrixXd data = subsample_rows(samples, sample_cap, eng);
    const long n = data.rows();

    TournamentOutcome out;
    out.est.setConstant(k, k, std::numeric_limits<double>::quiet_NaN());
    out.disqualified_by.setZero(k, k);

    std::vector<double> proj(static_cast<std::size_t>(n));
    std::vector<double> proj_neg(static_cast<std::size_t>(n));
    for (int j = 0; j < k; ++j) {
        for (int l = j + 1; l < k; ++l) {
            Eigen::VectorXd diff = candidates[l] - candidates[j];
            const double norm = diff.norm();
            // Duplicate candidates give no direction to compare along; the
            // pair is skipped and neither side can eliminate the other.
            if (norm == 0.0) continue;
            diff /= norm;

            Eigen::VectorXd p = data * diff;
            for (long i = 0; i < n; ++i) {
                proj[static_cast<std::size_t>(i)] = p(i);
                proj_neg[static_cast<std::size_t>(i)] = -p(i);
            }
            const double a_j = diff.dot(candidates[j]);
            const double a_l = diff.dot(candidates[l]);

            // Forward direction (j -> l): both candidates are compared
            // against the same 1-d estimate of the projected mean.
            const double est_fwd = estimator.estimate(proj, alpha);
            out.est(j, l) = est_fwd;
            if (std::abs(a_j - est_fwd) > std::abs(a_l - est_fwd) + 2.0 * f_bound) {
                out.disqualified_by(j, l) = 1;
            }
            // Reverse direction (l -> j) re-estimates on the negated
            // projections: the 1-d estimator need not be odd-symmetric, so
            // this is a genuinely separate comparison.
            const double est_rev = estimator.estimate(proj_neg, alpha);
            out.est(l, j) = est_rev;
            if (std::abs(-a_l - est_rev) > std::abs(-a_j - est_rev) + 2.0 * f_bound) {
                out.disqualified_by(l, j) = 1;
            }
        }
    }

    out.survivors.assign(k, 1);
    for (int j = 0; j < k; ++j) {
        for (int l = 0; l < k; ++l) {
            if (out.disqualified_by(j, l)) {
                out.survivors[j] = 0;
                break;
            }
        }
    }

    int winner = -1;
    for (int j = 0; j < k; ++j) {
        if (out.survivors[j]) {
            winner = j;
            break;
        }
    }
    if (winner < 0) {
        // Degenerate round: fall back to the candidate with the fewest
        // losses (lowest index on ties) and flag the situation.
        out.all_disqualified = true;
        long best_losses = std::numeric_limits<long>::max();
        winner = 0;
        for (int j = 0; j < k; ++j) {
            long losses = 0;
            for (int l = 0; l < k; ++l) losses += out.disqualified_by(j, l);
            if (losses < best_losses) {
                best_losses = losses;
                winner = j;
            }
        }
    }
    out.winner = winner;
    return out;
}

Eigen::VectorXd tournament_improve(const Eigen::VectorXd& current,
                                   const Eigen::MatrixXd& batch_a,
                                   const Eigen::MatrixXd& batch_b, double alpha,
                                   const OneDEstimator& estimator, double f_bound,
                                   long max_candidates, long sample_cap,
                                   std::uint64_t seed) {
    if (batch_a.rows() == 0 || batch_b.rows() == 0) {
        throw ConfigError("tournament_improve: empty batch");
    }
    if (batch_a.cols() != current.size() || batch_b.cols() != current.size()) {
        throw ConfigError("tournament_improve: batch dimension mismatch");
    }
    if (max_candidates < 2) {
        throw ConfigError("tournament_improve: max_candidates must be >= 2");
    }

    // `current` goes first so the lowest-index tie-break keeps it whenever it
    // is not strictly beaten.
    CandidateList candidates;
    candidates.push_back(current);
    const long n_a = batch_a.rows();
    const long budget = max_candidates - 1;
    if (n_a <= budget) {
        for (long i = 0; i < n_a; ++i) candidates.push_back(batch_a.row(i).transpose());
    } else {
        std::vector<long> order(n_a);
        std::iota(order.begin(), order.end(), 0L);
        auto eng = rng::engine(seed, "candidate_subsample");
        std::shuffle(order.begin(), order.end(), eng);
        order.resize(budget);
        std::sort(order.begin(), order.end());
        for (long row : order) candidates.push_back(batch_a.row(row).transpose());
    }

    TournamentOutcome outcome =
        tournament_select(candidates, batch_b, alpha, estimator, f_bound, sample_cap,
                          rng::derive(seed, "tournament_select"));
    return candidates[static_cast<std::size_t>(outcome.winner)];
}

} // namespace emest
