#include "emest/recursive.hpp"

#include "emest/errors.hpp"
#include "emest/rng.hpp"
#include "emest/subspace.hpp"
#include "emest/tournament.hpp"
#include "emest/util.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <numeric>

namespace emest {

// ---------------------------------------------------------------------------
// Batch supply
// ---------------------------------------------------------------------------

PlannedBatchSupplier::PlannedBatchSupplier(Eigen::MatrixXd samples, int t,
                                           std::uint64_t seed)
    : samples_(std::move(samples)) {
    const long n = samples_.rows();
    if (t < 1) throw ConfigError("batch supplier: t must be >= 1");
    if (t > n) throw ConfigError("batch supplier: t exceeds sample count");
    permutation_.resize(n);
    std::iota(permutation_.begin(), permutation_.end(), 0L);
    auto eng = rng::engine(seed, "batch_perm");
    std::shuffle(permutation_.begin(), permutation_.end(), eng);
    const long base = n / t;
    const long extra = n % t;
    sizes_.assign(t, base);
    for (long b = 0; b < extra; ++b) sizes_[static_cast<std::size_t>(b)] += 1;
}

Eigen::MatrixXd PlannedBatchSupplier::next_batch() {
    if (next_ >= static_cast<int>(sizes_.size())) {
        throw SupplierExhaustedError("batch supplier: all " +
                                     std::to_string(sizes_.size()) +
                                     " planned batches consumed");
    }
    const long size = sizes_[static_cast<std::size_t>(next_)];
    Eigen::MatrixXd out(size, samples_.cols());
    for (long i = 0; i < size; ++i) {
        out.row(i) = samples_.row(permutation_[static_cast<std::size_t>(cursor_ + i)]);
    }
    cursor_ += size;
    rows_served_ += size;
    ++next_;
    return out;
}

Eigen::MatrixXd CallbackBatchSupplier::next_batch() {
    Eigen::MatrixXd out = make_();
    if (out.rows() == 0) {
        throw SupplierExhaustedError("batch supplier: callback returned an empty batch");
    }
    ++batches_;
    rows_ += out.rows();
    return out;
}

LevelBatches FreshLevelProvider::next_level() {
    LevelBatches out;
    out.projection = supplier_->next_batch();
    out.tournament_a = supplier_->next_batch();
    out.tournament_b = supplier_->next_batch();
    return out;
}

Eigen::MatrixXd FreshLevelProvider::retry_projection_batch() {
    return supplier_->next_batch();
}

ReusingLevelProvider::ReusingLevelProvider(Eigen::MatrixXd batch)
    : batch_(std::move(batch)) {
    if (batch_.rows() < 2) {
        throw ConfigError("level provider: reused batch needs at least 2 rows");
    }
}

LevelBatches ReusingLevelProvider::next_level() {
    const long n = batch_.rows();
    const long half = n / 2;
    LevelBatches out;
    out.projection = batch_;
    out.tournament_a = batch_.topRows(half);
    out.tournament_b = batch_.bottomRows(n - half);
    return out;
}

Eigen::MatrixXd ReusingLevelProvider::retry_projection_batch() {
    throw SupplierExhaustedError(
        "level provider: no fresh batch available for an acceptance retry");
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

void AlgoConfig::validate() const {
    if (!(delta > 0.0)) throw ConfigError("algo.delta: must be positive");
    if (tau && !(*tau > 0.0 && *tau < 1.0)) {
        throw ConfigError("algo.tau: must be in (0, 1)");
    }
    if (!(base_case_constant > 0.0)) {
        throw ConfigError("algo.base_case_constant: must be positive");
    }
    if (base_case_dim < 0) throw ConfigError("algo.base_case_dim: must be >= 0");
    if (!(kappa_factor > 0.0)) throw ConfigError("algo.kappa_factor: must be positive");
    if (!(profile.c_delta > 0.0)) throw ConfigError("algo.c_delta: must be positive");
    if (profile.polylog_exponent < 0) {
        throw ConfigError("algo.polylog_exponent: must be >= 0");
    }
    if (!(alpha_cap > 0.0 && alpha_cap < 1.0)) {
        throw ConfigError("algo.alpha_cap: must be in (0, 1)");
    }
    if (outer_iterations && *outer_iterations < 1) {
        throw ConfigError("algo.outer_iterations: must be >= 1");
    }
    if (max_candidates < 2) throw ConfigError("algo.max_candidates: must be >= 2");
    if (tournament_sample_cap < 0) {
        throw ConfigError("algo.tournament_sample_cap: must be >= 0");
    }
}

namespace {

// Fallback failure budget for direct recursive_estimate calls; the pipeline
// always resolves tau from N and r before descending.
constexpr double kDefaultTau = 1e-6;

double resolve_tau(const AlgoConfig& cfg) { return cfg.tau.value_or(kDefaultTau); }

int padded_dimension(int dim) {
    int p = 1;
    while (p < dim) p *= 2;
    return p;
}

bool base_case_one(int d, long n, double tau, int root_dim, const AlgoConfig& cfg) {
    if (cfg.base_case_dim > 0) return d <= cfg.base_case_dim;
    const double log2_root = std::max(1.0, std::log2(static_cast<double>(root_dim)));
    const double threshold = cfg.base_case_constant *
                             std::log(static_cast<double>(n) * d / tau) *
                             log2_root * log2_root;
    return static_cast<double>(d) <= threshold;
}

} // namespace

// ---------------------------------------------------------------------------
// Recursive descent
// ---------------------------------------------------------------------------

namespace {

Eigen::VectorXd recursive_estimate_impl(const Eigen::MatrixXd& projection,
                                        LevelBatchProvider& provider,
                                        const Eigen::VectorXd& current, double alpha,
                                        const AlgoConfig& cfg, std::uint64_t seed,
                                        std::vector<RecursionLevelLog>* log,
                                        int iteration, int depth) {
    const int d = static_cast<int>(projection.rows());
    const int root_dim = static_cast<int>(projection.cols());
    if (d < 1) throw ConfigError("recursive_estimate: empty projection");
    if (current.size() != d) {
        throw ConfigError("recursive_estimate: current estimate has wrong dimension");
    }
    {
        const Eigen::MatrixXd gram = projection * projection.transpose();
        if (!gram.isApprox(Eigen::MatrixXd::Identity(d, d), 1e-8)) {
            throw ConfigError("recursive_estimate: projection is not row-orthonormal");
        }
    }

    const ShorthEstimator estimator;
    const double alpha_eff = std::min(alpha, cfg.alpha_cap);
    const double tau = resolve_tau(cfg);

    LevelBatches level = provider.next_level();
    const Eigen::MatrixXd s = level.projection * projection.transpose();
    const Eigen::MatrixXd a = level.tournament_a * projection.transpose();
    const Eigen::MatrixXd b = level.tournament_b * projection.transpose();
    const long n = s.rows();

    RecursionLevelLog entry;
    entry.iteration = iteration;
    entry.depth = depth;
    entry.dim = d;
    entry.batch_rows = n;
    entry.accept_count = -1;
    entry.f_bound = f_delta(alpha_eff, std::max(b.rows(), 1L), cfg.profile);

    const Eigen::VectorXd improved =
        tournament_improve(current, a, b, alpha_eff, estimator, entry.f_bound,
                           cfg.max_candidates, cfg.tournament_sample_cap,
                           rng::derive(seed, "level_tournament"));

    if (base_case_one(d, n, tau, root_dim, cfg)) {
        entry.base_case = true;
        if (log) log->push_back(entry);
        return naive_multivariate(s, alpha_eff, estimator);
    }

    const double f_level = f_delta(alpha_eff, n, cfg.profile);
    if (std::sqrt(static_cast<double>(d)) <= f_level) {
        // The 1-d profile already dominates sqrt(d): the tournament winner is
        // as good as this dimension gets.
        entry.early_exit = true;
        if (log) log->push_back(entry);
        return improved;
    }

    PartialEstimateResult part;
    try {
        part = partial_estimate(improved, s, rng::derive(seed, "filter"));
    } catch (const EmptyAcceptanceError&) {
        // One retry on a fresh batch; a second failure aborts the trial.
        const Eigen::MatrixXd s2 =
            provider.retry_projection_batch() * projection.transpose();
        part = partial_estimate(improved, s2, rng::derive(seed, "filter_retry"));
        entry.retries = 1;
        entry.batch_rows = s2.rows();
    }

    entry.accept_count = part.accept_count;
    entry.trace = part.trace;
    entry.low_half_max_eigenvalue = part.split.eigenvalues(d / 2);
    if (log) log->push_back(entry);

    const Eigen::MatrixXd child_projection = part.split.p_high * projection;
    const Eigen::VectorXd child_current = part.split.p_high * improved;
    const Eigen::VectorXd mu_high = recursive_estimate_impl(
        child_projection, provider, child_current, alpha, cfg,
        rng::derive(seed, "descend"), log, iteration, depth + 1);

    return part.mu_low + part.split.p_high.transpose() * mu_high;
}

} // namespace

Eigen::VectorXd recursive_estimate(const Eigen::MatrixXd& projection,
                                   LevelBatchProvider& provider,
                                   const Eigen::VectorXd& current, double alpha,
                                   const AlgoConfig& config, std::uint64_t seed,
                                   std::vector<RecursionLevelLog>* log, int iteration) {
    config.validate();
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw ConfigError("recursive_estimate: alpha must be in (0, 1]");
    }
    return recursive_estimate_impl(projection, provider, current, alpha, config, seed,
                                   log, iteration, 0);
}

// ---------------------------------------------------------------------------
// Outer pipeline
// ---------------------------------------------------------------------------

namespace {

// Wraps a supplier of D-dimensional batches as one of D_pad-dimensional
// batches, appending zero coordinates.
class PaddingBatchSupplier final : public BatchSupplier {
public:
    PaddingBatchSupplier(BatchSupplier& inner, int dim_padded)
        : inner_(&inner), dim_padded_(dim_padded) {}

    Eigen::MatrixXd next_batch() override {
        Eigen::MatrixXd raw = inner_->next_batch();
        if (raw.cols() == dim_padded_) return raw;
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(raw.rows(), dim_padded_);
        out.leftCols(raw.cols()) = raw;
        return out;
    }
    long batches_served() const override { return inner_->batches_served(); }
    long samples_served() const override { return inner_->samples_served(); }

private:
    BatchSupplier* inner_;
    int dim_padded_;
};

int default_outer_iterations(long n_total) {
    // ceil(log2 N) computed in integers, clamped to [1, 40].
    if (n_total <= 2) return 1;
    const int r = static_cast<int>(
        std::bit_width(static_cast<unsigned long long>(n_total - 1)));
    return std::min(r, 40);
}

double error_against(const Eigen::VectorXd& padded_estimate,
                     const Eigen::VectorXd& truth, int dim) {
    return (padded_estimate.head(dim) - truth).norm();
}

} // namespace

EstimateReport entangled_mean_estimation(BatchSupplier& supplier, int dim, long n_total,
                                         double alpha, const AlgoConfig& config,
                                         std::uint64_t seed,
                                         const Eigen::VectorXd* true_mean) {
    config.validate();
    if (dim < 1) throw ConfigError("estimation: dimension must be >= 1");
    if (n_total < 1) throw ConfigError("estimation: sample count must be >= 1");
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw ConfigError("estimation: alpha must be in (0, 1]");
    }
    if (true_mean && true_mean->size() != dim) {
        throw ConfigError("estimation: true mean has wrong dimension");
    }

    const auto t_start = std::chrono::steady_clock::now();

    EstimateReport report;
    report.seed = seed;
    RunPlan& plan = report.plan;
    plan.dim_input = dim;
    plan.dim_padded = padded_dimension(dim);
    plan.m = std::max(1, static_cast<int>(std::round(std::log2(plan.dim_padded))));
    plan.r = config.outer_iterations ? *config.outer_iterations
                                     : default_outer_iterations(n_total);
    plan.schedule = config.schedule;
    plan.t = config.schedule == BatchSchedule::Fresh ? 2 + plan.m * (3 * plan.r + 1)
                                                     : 2 + plan.r;
    plan.tau = config.tau ? *config.tau
                          : std::pow(static_cast<double>(n_total), -config.delta) /
                                plan.r;
    if (n_total < plan.t) {
        throw InfeasibleError("estimation: need at least " + std::to_string(plan.t) +
                                  " samples for " + std::to_string(plan.t) +
                                  " batches (r=" + std::to_string(plan.r) +
                                  "), got " + std::to_string(n_total),
                              plan.t);
    }
    plan.n_batch = n_total / plan.t;

    // The recursion below always sees the resolved tau.
    AlgoConfig cfg = config;
    cfg.tau = plan.tau;

    PaddingBatchSupplier padded(supplier, plan.dim_padded);
    const ShorthEstimator estimator;
    const double alpha_eff = std::min(alpha, cfg.alpha_cap);
    const double f_warm = f_delta(alpha_eff, std::max(plan.n_batch, 1L), cfg.profile);

    const Eigen::MatrixXd warm_a = padded.next_batch();
    const Eigen::MatrixXd warm_b = padded.next_batch();
    Eigen::VectorXd current = tournament_improve(
        Eigen::VectorXd::Zero(plan.dim_padded), warm_a, warm_b, alpha_eff, estimator,
        f_warm, cfg.max_candidates, cfg.tournament_sample_cap,
        rng::derive(seed, "warm_start"));
    if (true_mean) {
        report.warm_start_error = error_against(current, *true_mean, dim);
    }

    if (f_warm >= std::sqrt(static_cast<double>(plan.dim_padded))) {
        // The 1-d profile is above sqrt(D): refinement cannot certify any
        // improvement, so the warm start is the answer.
        report.early_return = true;
    } else {
        const Eigen::MatrixXd identity =
            Eigen::MatrixXd::Identity(plan.dim_padded, plan.dim_padded);
        FreshLevelProvider fresh(padded);
        for (int it = 0; it < plan.r; ++it) {
            const std::uint64_t iter_seed = rng::derive(seed, "outer_iteration",
                                                        static_cast<std::uint64_t>(it));
            if (cfg.schedule == BatchSchedule::Fresh) {
                current = recursive_estimate_impl(identity, fresh, current, alpha, cfg,
                                                  iter_seed, &report.recursion_log, it,
                                                  0);
            } else {
                ReusingLevelProvider reusing(padded.next_batch());
                current = recursive_estimate_impl(identity, reusing, current, alpha,
                                                  cfg, iter_seed,
                                                  &report.recursion_log, it, 0);
            }
            if (true_mean) {
                report.trace.push_back(error_against(current, *true_mean, dim));
            }
        }
    }

    report.estimate = current.head(dim);
    report.batches_consumed = supplier.batches_served();
    report.samples_consumed = supplier.samples_served();
    report.wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t_start)
                         .count();
    return report;
}

EstimateReport entangled_mean_estimation(const Eigen::MatrixXd& samples, double alpha,
                                         const AlgoConfig& config, std::uint64_t seed,
                                         const Eigen::VectorXd* true_mean) {
    config.validate();
    const long n = samples.rows();
    const int dim = static_cast<int>(samples.cols());
    if (n < 1 || dim < 1) throw ConfigError("estimation: empty sample matrix");

    // Pre-compute the batch count to give PlannedBatchSupplier its t; the
    // supplier-driven overload re-derives the identical plan.
    const int r = config.outer_iterations ? *config.outer_iterations
                                          : default_outer_iterations(n);
    const int dim_padded = padded_dimension(dim);
    const int m = std::max(1, static_cast<int>(std::round(std::log2(dim_padded))));
    const int t =
        config.schedule == BatchSchedule::Fresh ? 2 + m * (3 * r + 1) : 2 + r;
    if (n < t) {
        throw InfeasibleError("estimation: need at least " + std::to_string(t) +
                                  " samples for " + std::to_string(t) + " batches (r=" +
                                  std::to_string(r) + "), got " + std::to_string(n),
                              t);
    }
    PlannedBatchSupplier supplier(samples, t, rng::derive(seed, "batch_split"));
    return entangled_mean_estimation(supplier, dim, n, alpha, config, seed, true_mean);
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

namespace {

Eigen::VectorXd coordinate_median(const Eigen::MatrixXd& samples) {
    const long n = samples.rows();
    const int d = static_cast<int>(samples.cols());
    Eigen::VectorXd out(d);
    std::vector<double> column(static_cast<std::size_t>(n));
    for (int j = 0; j < d; ++j) {
        for (long i = 0; i < n; ++i) column[static_cast<std::size_t>(i)] = samples(i, j);
        auto mid = column.begin() + n / 2;
        std::nth_element(column.begin(), mid, column.end());
        if (n % 2 == 1) {
            out(j) = *mid;
        } else {
            const double upper = *mid;
            out(j) = 0.5 * (*std::max_element(column.begin(), mid) + upper);
        }
    }
    return out;
}

Eigen::VectorXd oracle_inlier_mean(const Dataset& data) {
    if (!data.has_truth) {
        throw MissingTruthError("baselines: oracle_inlier_mean needs ground truth");
    }
    const long inliers = data.inlier_count();
    if (inliers == 0) throw MissingTruthError("baselines: dataset marks no inliers");
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(data.dim);
    for (long i = 0; i < data.n; ++i) {
        if (data.inlier_mask[static_cast<std::size_t>(i)]) {
            sum += data.samples.row(i).transpose();
        }
    }
    return sum / static_cast<double>(inliers);
}

} // namespace

std::map<std::string, Eigen::VectorXd>
baseline_estimators(const Dataset& data, double alpha,
                    const std::optional<std::vector<std::string>>& names) {
    if (data.samples.rows() == 0) throw ConfigError("baselines: empty dataset");

    std::vector<std::string> wanted;
    if (names) {
        wanted = *names;
    } else {
        wanted = {"sample_mean", "coordinate_median", "naive_1d"};
        if (data.has_truth) wanted.push_back("oracle_inlier_mean");
    }

    std::map<std::string, Eigen::VectorXd> out;
    for (const std::string& name : wanted) {
        if (name == "sample_mean") {
            out[name] = data.samples.colwise().mean().transpose();
        } else if (name == "coordinate_median") {
            out[name] = coordinate_median(data.samples);
        } else if (name == "naive_1d") {
            out[name] = naive_multivariate(data.samples, alpha, ShorthEstimator{});
        } else if (name == "oracle_inlier_mean") {
            out[name] = oracle_inlier_mean(data);
        } else {
            throw ConfigError("baselines: unknown estimator '" + name + "'");
        }
    }
    return out;
}

} // namespace emest
