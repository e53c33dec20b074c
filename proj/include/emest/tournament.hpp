#ifndef EMEST_TOURNAMENT_HPP
#define EMEST_TOURNAMENT_HPP

#include "emest/scalar.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace emest {

using CandidateList = std::vector<Eigen::VectorXd>;

// Full record of a pairwise elimination round. est(j, l) holds the 1-d
// estimate along the direction from candidate j toward candidate l (NaN on
// the diagonal and for duplicate pairs); disqualified_by(j, l) is 1 when the
// comparison against l knocked j out.
struct TournamentOutcome {
    int winner = 0;
    std::vector<std::uint8_t> survivors;
    Eigen::MatrixXd est;
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> disqualified_by;
    // Set when every candidate lost at least one comparison (possible with a
    // misbehaving 1-d estimator); the winner is then the lowest-index
    // candidate with the fewest losses.
    bool all_disqualified = false;
};

// Pairwise elimination between candidate means, judged on `samples`. Each
// ordered pair (j, l) projects the data onto the unit direction from j to l,
// runs the 1-d estimator, and disqualifies j when its projection sits more
// than 2 * f_bound further from the estimate than l's does. The winner is the
// lowest-index never-disqualified candidate. `sample_cap` > 0 judges on a
// uniform subsample of that size (seeded); 0 uses every sample.
TournamentOutcome tournament_select(const CandidateList& candidates,
                                    const Eigen::MatrixXd& samples, double alpha,
                                    const OneDEstimator& estimator, double f_bound,
                                    long sample_cap = 0, std::uint64_t seed = 0);

// One improvement step for a current estimate: candidates are `current` plus
// the rows of batch_a (capped at max_candidates total, uniform subsample and
// current always retained), judged on batch_b. Returns the winning vector;
// ties favor `current`, which is listed first.
Eigen::VectorXd tournament_improve(const Eigen::VectorXd& current,
                                   const Eigen::MatrixXd& batch_a,
                                   const Eigen::MatrixXd& batch_b, double alpha,
                                   const OneDEstimator& estimator, double f_bound,
                                   long max_candidates = 256, long sample_cap = 0,
                                   std::uint64_t seed = 0);

} // namespace emest

#endif
