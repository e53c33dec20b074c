#ifndef EMEST_HARNESS_HPP
#define EMEST_HARNESS_HPP

#include "emest/model.hpp"
#include "emest/recursive.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace emest {

using nlohmann::json;

// Parameters for one generated dataset, parsed from a JSON block or CLI
// flags. `mu_norm` > 0 draws a seeded random direction of that norm as the
// true mean (0 keeps the mean at the origin).
struct GenerateSpec {
    int dim = 1;
    long n = 0;
    double alpha = 1.0;
    AdversarySpec adversary;
    double mu_norm = 0.0;
    std::uint64_t seed = 0;
};

GenerateSpec generate_spec_from_json(const json& block, const std::string& path_prefix);
Dataset run_generate(const GenerateSpec& spec);

AlgoConfig algo_config_from_json(const json& block);
json algo_config_to_json(const AlgoConfig& cfg);

// Full single-run report as a JSON document (stable field names).
json report_to_json(const EstimateReport& report, const AlgoConfig& cfg);

// Single estimation run driven by a JSON config: either {"dataset": path} or
// {"generate": {...}}, plus optional "algo", "seed", "estimator", "out".
json run_single(const json& config);

struct SweepConfig {
    std::vector<int> dims;
    std::vector<long> ns;
    std::vector<double> alphas;
    std::vector<AdversarySpec> adversaries;
    int trials = 1;
    std::vector<std::string> estimators;
    std::uint64_t root_seed = 0;
    double mu_norm = 0.0;
    AlgoConfig algo;
    std::string out_path;      // empty = stdout only
    bool stable_timing = false; // write ms=0 so reruns are byte-identical

    static SweepConfig from_json(const json& doc);
};

struct ResultRow {
    int dim = 0;
    long n = 0;
    double alpha = 0.0;
    std::string adversary;
    std::string estimator;
    int trial = 0;
    std::uint64_t seed = 0;
    double l2_error = 0.0;
    long ms = 0;
    std::string notes;
};

// Stable per-cell seed: mix of the root seed with an FNV-1a hash of the
// canonical cell string (documented in the README).
std::uint64_t cell_seed(std::uint64_t root, int dim, long n, double alpha,
                        const std::string& adversary_canonical, int trial);

// One row per (cell, estimator, trial), sorted by
// (D, N, alpha, adversary, estimator, trial). Cells run on a worker pool
// (EMEST_THREADS caps it); failures become rows with notes=failed:<code>.
std::vector<ResultRow> run_sweep(const SweepConfig& cfg);

void write_csv(const std::vector<ResultRow>& rows, std::ostream& out);

// l2 distance between a stored estimate (JSON report or bare array) and the
// ground truth of a dataset file. MissingTruthError when the dataset has no
// truth trailer.
double score_estimate(const std::string& estimate_path, const std::string& dataset_path);

// Deterministic invariant suite; prints one line per check, returns the
// number of failures.
int selftest(std::ostream& out);

// Worker pool width: EMEST_THREADS if set (>=1), else hardware concurrency.
int worker_count();

} // namespace emest

#endif
