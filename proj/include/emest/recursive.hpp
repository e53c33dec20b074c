#ifndef EMEST_RECURSIVE_HPP
#define EMEST_RECURSIVE_HPP

#include "emest/model.hpp"
#include "emest/scalar.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace emest {

// ---------------------------------------------------------------------------
// Batch supply
// ---------------------------------------------------------------------------

// Source of sample batches for the recursion. Implementations must yield
// batches of a fixed dimension; exhaustion raises SupplierExhaustedError.
class BatchSupplier {
public:
    virtual ~BatchSupplier() = default;
    virtual Eigen::MatrixXd next_batch() = 0;
    virtual long batches_served() const = 0;
    virtual long samples_served() const = 0;
};

// Splits an owned sample matrix into t batches via a uniform row permutation
// (same scheme as split_batches: first N mod t batches get one extra row).
class PlannedBatchSupplier final : public BatchSupplier {
public:
    PlannedBatchSupplier(Eigen::MatrixXd samples, int t, std::uint64_t seed);

    Eigen::MatrixXd next_batch() override;
    long batches_served() const override { return next_; }
    long samples_served() const override { return rows_served_; }
    int total_batches() const { return static_cast<int>(sizes_.size()); }
    const std::vector<long>& sizes() const { return sizes_; }

private:
    Eigen::MatrixXd samples_;
    std::vector<long> permutation_;
    std::vector<long> sizes_;
    int next_ = 0;
    long cursor_ = 0;
    long rows_served_ = 0;
};

// Adapter for synthetic suppliers (tests, stress drivers): each next_batch()
// call invokes the callback.
class CallbackBatchSupplier final : public BatchSupplier {
public:
    explicit CallbackBatchSupplier(std::function<Eigen::MatrixXd()> make)
        : make_(std::move(make)) {}

    Eigen::MatrixXd next_batch() override;
    long batches_served() const override { return batches_; }
    long samples_served() const override { return rows_; }

private:
    std::function<Eigen::MatrixXd()> make_;
    long batches_ = 0;
    long rows_ = 0;
};

// What one recursion level consumes: a batch to project/filter and the
// tournament's candidate and judge batches.
struct LevelBatches {
    Eigen::MatrixXd projection;
    Eigen::MatrixXd tournament_a;
    Eigen::MatrixXd tournament_b;
};

class LevelBatchProvider {
public:
    virtual ~LevelBatchProvider() = default;
    virtual LevelBatches next_level() = 0;
    // One extra batch for the empty-acceptance retry.
    virtual Eigen::MatrixXd retry_projection_batch() = 0;
};

// Three fresh batches per level (plus fresh retries) from an underlying
// supplier: the fully sample-split schedule.
class FreshLevelProvider final : public LevelBatchProvider {
public:
    explicit FreshLevelProvider(BatchSupplier& supplier) : supplier_(&supplier) {}
    LevelBatches next_level() override;
    Eigen::MatrixXd retry_projection_batch() override;

private:
    BatchSupplier* supplier_;
};

// Reuses one batch for every level of a descent: the projection set is the
// whole batch and the tournament judges one half against candidates from the
// other. Cannot serve retries (no fresh data to give).
class ReusingLevelProvider final : public LevelBatchProvider {
public:
    explicit ReusingLevelProvider(Eigen::MatrixXd batch);
    LevelBatches next_level() override;
    Eigen::MatrixXd retry_projection_batch() override;

private:
    Eigen::MatrixXd batch_;
};

// ---------------------------------------------------------------------------
// Configuration and reporting
// ---------------------------------------------------------------------------

enum class BatchSchedule {
    Fresh,        // t = 2 + m(3r+1) batches, three fresh per level
    PerIteration, // t = 2 + r batches, one batch reused within each iteration
};

struct AlgoConfig {
    // Failure-budget exponent: tau defaults to N^(-delta) / r.
    double delta = 3.0;
    // Per-level failure budget; resolved from delta when unset.
    std::optional<double> tau;
    // Base case 1 triggers when d <= C * log(n*d/tau) * log2(D)^2 ...
    double base_case_constant = 4.0;
    // ... unless this is positive, which replaces the formula with a fixed
    // dimension threshold (d <= base_case_dim).
    long base_case_dim = 0;
    // Per-level contraction target constant 1/(kappa_factor * log2 D); not a
    // control-flow input, but echoed in reports for analysis.
    double kappa_factor = 10.0;
    // 1-d error profile used for every f(alpha, n) evaluation.
    ErrorProfileConfig profile{};
    // Ceiling applied to alpha before 1-d estimation: at alpha = 1 the
    // shortest-window estimator degenerates to the midrange, so the pipeline
    // never asks for a window covering every sample.
    double alpha_cap = 0.95;
    // Outer refinement iterations; default ceil(log2 N) capped at 40.
    std::optional<int> outer_iterations;
    long max_candidates = 256;
    long tournament_sample_cap = 0; // 0 = judge tournaments on all samples
    BatchSchedule schedule = BatchSchedule::Fresh;

    void validate() const; // throws ConfigError
};

struct RecursionLevelLog {
    int iteration = 0;
    int depth = 0;
    int dim = 0;
    long batch_rows = 0;
    long accept_count = 0;      // -1 for base-case levels that never filter
    double low_half_max_eigenvalue = 0.0;
    double trace = 0.0;
    double f_bound = 0.0;
    int retries = 0;
    bool base_case = false;
    bool early_exit = false;    // base case 2: sqrt(d) <= f(alpha, n)
};

// Derived per-run quantities, echoed into reports.
struct RunPlan {
    int dim_input = 0;
    int dim_padded = 0;
    int m = 0;          // max(1, log2 of padded dimension)
    int r = 0;          // outer iterations
    int t = 0;          // total batches
    long n_batch = 0;   // nominal per-batch size (N / t)
    double tau = 0.0;
    BatchSchedule schedule = BatchSchedule::Fresh;
};

struct EstimateReport {
    Eigen::VectorXd estimate;
    RunPlan plan;
    bool early_return = false;
    double warm_start_error = -1.0;     // -1 when ground truth is absent
    std::vector<double> trace;          // per-iteration error, truth only
    std::vector<RecursionLevelLog> recursion_log;
    std::uint64_t seed = 0;
    double wall_ms = 0.0;
    long batches_consumed = 0;
    long samples_consumed = 0;
};

// ---------------------------------------------------------------------------
// Estimators
// ---------------------------------------------------------------------------

// One descent of the dimension-halving estimator. P maps the ambient space
// (columns) to the current working subspace (rows) and must be
// row-orthonormal to 1e-8. Per level: draw + project a batch, improve
// `current` by tournament, stop at a base case (small d, or sqrt(d) below the
// 1-d error profile), otherwise filter around the improved point, keep its
// low-variance mean, and recurse on the high-variance half.
Eigen::VectorXd recursive_estimate(const Eigen::MatrixXd& projection,
                                   LevelBatchProvider& provider,
                                   const Eigen::VectorXd& current, double alpha,
                                   const AlgoConfig& config, std::uint64_t seed,
                                   std::vector<RecursionLevelLog>* log = nullptr,
                                   int iteration = 0);

// Full pipeline: pad the dimension to a power of two, split the samples into
// the scheduled batches, warm-start by tournament from the zero vector, then
// run r outer refinement iterations of recursive_estimate (early-returning
// the warm start when the 1-d profile already exceeds sqrt(D)).
EstimateReport entangled_mean_estimation(const Eigen::MatrixXd& samples, double alpha,
                                         const AlgoConfig& config, std::uint64_t seed,
                                         const Eigen::VectorXd* true_mean = nullptr);

// Supplier-driven variant (the matrix version wraps this): `n_total` is the
// total sample budget used to derive r, tau and the per-batch size.
EstimateReport entangled_mean_estimation(BatchSupplier& supplier, int dim, long n_total,
                                         double alpha, const AlgoConfig& config,
                                         std::uint64_t seed,
                                         const Eigen::VectorXd* true_mean = nullptr);

// Reference estimators for benchmark comparison. Available names:
// sample_mean, coordinate_median, naive_1d, oracle_inlier_mean. With no
// explicit selection, computes all that the dataset supports (the oracle only
// when ground truth is attached). Requesting the oracle on a truth-free
// dataset raises MissingTruthError.
std::map<std::string, Eigen::VectorXd>
baseline_estimators(const Dataset& data, double alpha,
                    const std::optional<std::vector<std::string>>& names = std::nullopt);

} // namespace emest

#endif
