#include "emest/harness.hpp"

#include "emest/errors.hpp"
#include "emest/rng.hpp"
#include "emest/scalar.hpp"
#include "emest/subspace.hpp"
#include "emest/util.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>
#include <tuple>

namespace emest {

namespace {

// --- strict JSON field access with path-carrying errors --------------------

void check_known_keys(const json& obj, const std::string& prefix,
                      std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed) {
            if (item.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw ConfigError(prefix + item.key() + ": unknown field");
        }
    }
}

const json& require_field(const json& obj, const std::string& prefix, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw ConfigError(prefix + key + ": missing required field");
    }
    return *it;
}

double as_double(const json& value, const std::string& path) {
    if (!value.is_number()) throw ConfigError(path + ": expected a number");
    return value.get<double>();
}

long as_long(const json& value, const std::string& path) {
    if (!value.is_number_integer()) throw ConfigError(path + ": expected an integer");
    return value.get<long>();
}

std::uint64_t as_u64(const json& value, const std::string& path) {
    if (!value.is_number_integer() || value.is_number_float()) {
        throw ConfigError(path + ": expected an unsigned integer");
    }
    if (value.is_number_unsigned()) return value.get<std::uint64_t>();
    const long long v = value.get<long long>();
    if (v < 0) throw ConfigError(path + ": expected an unsigned integer");
    return static_cast<std::uint64_t>(v);
}

std::string as_string(const json& value, const std::string& path) {
    if (!value.is_string()) throw ConfigError(path + ": expected a string");
    return value.get<std::string>();
}

} // namespace

// --- generation ------------------------------------------------------------

GenerateSpec generate_spec_from_json(const json& block, const std::string& prefix) {
    if (!block.is_object()) throw ConfigError(prefix + ": expected an object");
    check_known_keys(block, prefix + ".",
                     {"dim", "n", "alpha", "adversary", "seed", "mu_norm"});
    GenerateSpec spec;
    spec.dim = static_cast<int>(as_long(require_field(block, prefix + ".", "dim"),
                                        prefix + ".dim"));
    spec.n = as_long(require_field(block, prefix + ".", "n"), prefix + ".n");
    spec.alpha = as_double(require_field(block, prefix + ".", "alpha"),
                           prefix + ".alpha");
    if (auto it = block.find("adversary"); it != block.end()) {
        spec.adversary = AdversarySpec::parse(as_string(*it, prefix + ".adversary"));
    }
    if (auto it = block.find("seed"); it != block.end()) {
        spec.seed = as_u64(*it, prefix + ".seed");
    }
    if (auto it = block.find("mu_norm"); it != block.end()) {
        spec.mu_norm = as_double(*it, prefix + ".mu_norm");
        if (spec.mu_norm < 0.0) throw ConfigError(prefix + ".mu_norm: must be >= 0");
    }
    return spec;
}

Dataset run_generate(const GenerateSpec& spec) {
    ModelParams params;
    params.dim = spec.dim;
    params.n = spec.n;
    params.alpha = spec.alpha;
    if (spec.mu_norm > 0.0) {
        auto eng = rng::engine(spec.seed, "mu_direction");
        std::normal_distribution<double> gauss(0.0, 1.0);
        Eigen::VectorXd direction(spec.dim);
        for (int i = 0; i < spec.dim; ++i) direction(i) = gauss(eng);
        const double norm = direction.norm();
        if (norm == 0.0) {
            direction.setZero();
            direction(0) = 1.0;
        } else {
            direction /= norm;
        }
        params.mu = spec.mu_norm * direction;
    }
    return generate_dataset(params, spec.adversary, spec.seed);
}

// --- algo config (de)serialization -----------------------------------------

AlgoConfig algo_config_from_json(const json& block) {
    if (!block.is_object()) throw ConfigError("algo: expected an object");
    check_known_keys(block, "algo.",
                     {"delta", "tau", "base_case_constant", "base_case_dim",
                      "kappa_factor", "c_delta", "polylog_exponent", "profile_delta",
                      "alpha_cap", "outer_iterations", "max_candidates",
                      "tournament_sample_cap", "schedule"});
    AlgoConfig cfg;
    if (auto it = block.find("delta"); it != block.end())
        cfg.delta = as_double(*it, "algo.delta");
    if (auto it = block.find("tau"); it != block.end())
        cfg.tau = as_double(*it, "algo.tau");
    if (auto it = block.find("base_case_constant"); it != block.end())
        cfg.base_case_constant = as_double(*it, "algo.base_case_constant");
    if (auto it = block.find("base_case_dim"); it != block.end())
        cfg.base_case_dim = as_long(*it, "algo.base_case_dim");
    if (auto it = block.find("kappa_factor"); it != block.end())
        cfg.kappa_factor = as_double(*it, "algo.kappa_factor");
    if (auto it = block.find("c_delta"); it != block.end())
        cfg.profile.c_delta = as_double(*it, "algo.c_delta");
    if (auto it = block.find("polylog_exponent"); it != block.end())
        cfg.profile.polylog_exponent =
            static_cast<int>(as_long(*it, "algo.polylog_exponent"));
    if (auto it = block.find("profile_delta"); it != block.end())
        cfg.profile.delta = as_double(*it, "algo.profile_delta");
    if (auto it = block.find("alpha_cap"); it != block.end())
        cfg.alpha_cap = as_double(*it, "algo.alpha_cap");
    if (auto it = block.find("outer_iterations"); it != block.end())
        cfg.outer_iterations = static_cast<int>(as_long(*it, "algo.outer_iterations"));
    if (auto it = block.find("max_candidates"); it != block.end())
        cfg.max_candidates = as_long(*it, "algo.max_candidates");
    if (auto it = block.find("tournament_sample_cap"); it != block.end())
        cfg.tournament_sample_cap = as_long(*it, "algo.tournament_sample_cap");
    if (auto it = block.find("schedule"); it != block.end()) {
        const std::string s = as_string(*it, "algo.schedule");
        if (s == "fresh") {
            cfg.schedule = BatchSchedule::Fresh;
        } else if (s == "per_iteration") {
            cfg.schedule = BatchSchedule::PerIteration;
        } else {
            throw ConfigError("algo.schedule: expected 'fresh' or 'per_iteration'");
        }
    }
    cfg.validate();
    return cfg;
}

json algo_config_to_json(const AlgoConfig& cfg) {
    json out;
    out["delta"] = cfg.delta;
    if (cfg.tau) out["tau"] = *cfg.tau;
    out["base_case_constant"] = cfg.base_case_constant;
    out["base_case_dim"] = cfg.base_case_dim;
    out["kappa_factor"] = cfg.kappa_factor;
    out["c_delta"] = cfg.profile.c_delta;
    out["polylog_exponent"] = cfg.profile.polylog_exponent;
    out["profile_delta"] = cfg.profile.delta;
    out["alpha_cap"] = cfg.alpha_cap;
    if (cfg.outer_iterations) out["outer_iterations"] = *cfg.outer_iterations;
    out["max_candidates"] = cfg.max_candidates;
    out["tournament_sample_cap"] = cfg.tournament_sample_cap;
    out["schedule"] =
        cfg.schedule == BatchSchedule::Fresh ? "fresh" : "per_iteration";
    return out;
}

// --- single runs ------------------------------------------------------------

json report_to_json(const EstimateReport& report, const AlgoConfig& cfg) {
    json out;
    out["estimate"] = std::vector<double>(
        report.estimate.data(), report.estimate.data() + report.estimate.size());
    json plan;
    plan["dim_input"] = report.plan.dim_input;
    plan["dim_padded"] = report.plan.dim_padded;
    plan["m"] = report.plan.m;
    plan["r"] = report.plan.r;
    plan["t"] = report.plan.t;
    plan["n_batch"] = report.plan.n_batch;
    plan["tau"] = report.plan.tau;
    plan["schedule"] =
        report.plan.schedule == BatchSchedule::Fresh ? "fresh" : "per_iteration";
    out["plan"] = std::move(plan);
    out["early_return"] = report.early_return;
    if (report.warm_start_error >= 0.0) {
        out["warm_start_error"] = report.warm_start_error;
    }
    out["trace"] = report.trace;
    json levels = json::array();
    for (const RecursionLevelLog& lvl : report.recursion_log) {
        json entry;
        entry["iteration"] = lvl.iteration;
        entry["depth"] = lvl.depth;
        entry["dim"] = lvl.dim;
        entry["batch_rows"] = lvl.batch_rows;
        entry["accept_count"] = lvl.accept_count;
        entry["low_half_max_eigenvalue"] = lvl.low_half_max_eigenvalue;
        entry["trace"] = lvl.trace;
        entry["f_bound"] = lvl.f_bound;
        entry["retries"] = lvl.retries;
        entry["base_case"] = lvl.base_case;
        entry["early_exit"] = lvl.early_exit;
        levels.push_back(std::move(entry));
    }
    out["recursion_log"] = std::move(levels);
    out["seeds"] = json{{"root", report.seed}};
    out["wall_ms"] = report.wall_ms;
    out["batches_consumed"] = report.batches_consumed;
    out["samples_consumed"] = report.samples_consumed;
    out["config_echo"] = algo_config_to_json(cfg);
    return out;
}

json run_single(const json& config) {
    if (!config.is_object()) throw ConfigError("config: expected a JSON object");
    check_known_keys(config, "",
                     {"dataset", "generate", "algo", "seed", "estimator", "out"});

    const bool has_dataset = config.contains("dataset");
    const bool has_generate = config.contains("generate");
    if (has_dataset == has_generate) {
        throw ConfigError("config: exactly one of 'dataset' or 'generate' is required");
    }

    Dataset data;
    if (has_dataset) {
        data = read_dataset(as_string(config.at("dataset"), "dataset"));
    } else {
        data = run_generate(generate_spec_from_json(config.at("generate"), "generate"));
    }

    AlgoConfig algo;
    if (auto it = config.find("algo"); it != config.end()) {
        algo = algo_config_from_json(*it);
    }
    std::uint64_t seed = 0;
    if (auto it = config.find("seed"); it != config.end()) {
        seed = as_u64(*it, "seed");
    }
    std::string estimator = "recursive";
    if (auto it = config.find("estimator"); it != config.end()) {
        estimator = as_string(*it, "estimator");
    }

    json out;
    if (estimator == "recursive") {
        EstimateReport report = entangled_mean_estimation(
            data.samples, data.alpha, algo, seed, data.has_truth ? &data.mu : nullptr);
        out = report_to_json(report, algo);
        if (data.has_truth) {
            out["l2_error"] = (report.estimate - data.mu).norm();
        }
    } else {
        auto baselines =
            baseline_estimators(data, data.alpha, std::vector<std::string>{estimator});
        const Eigen::VectorXd& estimate = baselines.at(estimator);
        out["estimate"] =
            std::vector<double>(estimate.data(), estimate.data() + estimate.size());
        if (data.has_truth) {
            out["l2_error"] = (estimate - data.mu).norm();
        }
    }
    out["estimator"] = estimator;

    if (auto it = config.find("out"); it != config.end()) {
        const std::string path = as_string(*it, "out");
        std::ofstream file(path);
        if (!file) throw ConfigError("out: cannot open '" + path + "'");
        file << out.dump(2) << "\n";
        if (!file) throw ConfigError("out: write failed for '" + path + "'");
    }
    return out;
}

// --- sweeps -----------------------------------------------------------------

SweepConfig SweepConfig::from_json(const json& doc) {
    if (!doc.is_object()) throw ConfigError("sweep: expected a JSON object");
    check_known_keys(doc, "",
                     {"dims", "ns", "alphas", "adversaries", "trials", "estimators",
                      "seed", "mu_norm", "algo", "out", "stable_timing"});
    SweepConfig cfg;

    const json& dims = require_field(doc, "", "dims");
    if (!dims.is_array() || dims.empty()) throw ConfigError("dims: expected a non-empty array");
    for (std::size_t i = 0; i < dims.size(); ++i) {
        const long d = as_long(dims[i], "dims[" + std::to_string(i) + "]");
        if (d < 1) throw ConfigError("dims[" + std::to_string(i) + "]: must be >= 1");
        cfg.dims.push_back(static_cast<int>(d));
    }
    const json& ns = require_field(doc, "", "ns");
    if (!ns.is_array() || ns.empty()) throw ConfigError("ns: expected a non-empty array");
    for (std::size_t i = 0; i < ns.size(); ++i) {
        const long n = as_long(ns[i], "ns[" + std::to_string(i) + "]");
        if (n < 1) throw ConfigError("ns[" + std::to_string(i) + "]: must be >= 1");
        cfg.ns.push_back(n);
    }
    const json& alphas = require_field(doc, "", "alphas");
    if (!alphas.is_array() || alphas.empty()) {
        throw ConfigError("alphas: expected a non-empty array");
    }
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        const double a = as_double(alphas[i], "alphas[" + std::to_string(i) + "]");
        if (!(a > 0.0 && a <= 1.0)) {
            throw ConfigError("alphas[" + std::to_string(i) + "]: must be in (0, 1]");
        }
        cfg.alphas.push_back(a);
    }
    const json& advs = require_field(doc, "", "adversaries");
    if (!advs.is_array() || advs.empty()) {
        throw ConfigError("adversaries: expected a non-empty array");
    }
    for (std::size_t i = 0; i < advs.size(); ++i) {
        cfg.adversaries.push_back(AdversarySpec::parse(
            as_string(advs[i], "adversaries[" + std::to_string(i) + "]")));
    }
    const json& estimators = require_field(doc, "", "estimators");
    if (!estimators.is_array() || estimators.empty()) {
        throw ConfigError("estimators: expected a non-empty array");
    }
    for (std::size_t i = 0; i < estimators.size(); ++i) {
        cfg.estimators.push_back(
            as_string(estimators[i], "estimators[" + std::to_string(i) + "]"));
    }
    if (auto it = doc.find("trials"); it != doc.end()) {
        cfg.trials = static_cast<int>(as_long(*it, "trials"));
    }
    if (cfg.trials < 1) throw ConfigError("trials: must be >= 1");
    if (auto it = doc.find("seed"); it != doc.end()) {
        cfg.root_seed = as_u64(*it, "seed");
    }
    if (auto it = doc.find("mu_norm"); it != doc.end()) {
        cfg.mu_norm = as_double(*it, "mu_norm");
        if (cfg.mu_norm < 0.0) throw ConfigError("mu_norm: must be >= 0");
    }
    if (auto it = doc.find("algo"); it != doc.end()) {
        cfg.algo = algo_config_from_json(*it);
    }
    if (auto it = doc.find("out"); it != doc.end()) {
        cfg.out_path = as_string(*it, "out");
    }
    if (auto it = doc.find("stable_timing"); it != doc.end()) {
        if (!it->is_boolean()) throw ConfigError("stable_timing: expected a boolean");
        cfg.stable_timing = it->get<bool>();
    }
    return cfg;
}

std::uint64_t cell_seed(std::uint64_t root, int dim, long n, double alpha,
                        const std::string& adversary_canonical, int trial) {
    const std::string canonical = "D=" + std::to_string(dim) +
                                  "|N=" + std::to_string(n) +
                                  "|alpha=" + format_double(alpha) +
                                  "|adv=" + adversary_canonical +
                                  "|trial=" + std::to_string(trial);
    return rng::mix64(root ^ rng::fnv1a(canonical));
}

int worker_count() {
    if (const char* env = std::getenv("EMEST_THREADS")) {
        long v = 0;
        try {
            v = parse_long(env, "EMEST_THREADS");
        } catch (const std::runtime_error& e) {
            throw ConfigError(e.what());
        }
        if (v < 1) throw ConfigError("EMEST_THREADS: must be >= 1");
        return static_cast<int>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace {

struct SweepTask {
    int dim;
    long n;
    double alpha;
    const AdversarySpec* adversary;
    std::string adversary_name;
    int trial;
};

int error_code_for(const std::exception& e) {
    if (dynamic_cast<const InfeasibleError*>(&e)) return 3;
    if (dynamic_cast<const MissingTruthError*>(&e)) return 5;
    if (dynamic_cast<const ConfigError*>(&e)) return 2;
    if (dynamic_cast<const NumericalError*>(&e)) return 4;
    return 1;
}

std::string recursive_notes(const EstimateReport& report) {
    int max_depth = 0;
    long accepted = 0;
    for (const RecursionLevelLog& lvl : report.recursion_log) {
        max_depth = std::max(max_depth, lvl.depth);
        if (lvl.accept_count > 0) accepted += lvl.accept_count;
    }
    if (report.early_return) return "early_return";
    return "depth=" + std::to_string(max_depth) +
           ";accepted=" + std::to_string(accepted);
}

void run_sweep_task(const SweepConfig& cfg, const SweepTask& task,
                    std::vector<ResultRow>& rows, std::size_t row_offset) {
    const std::uint64_t cseed = cell_seed(cfg.root_seed, task.dim, task.n, task.alpha,
                                          task.adversary_name, task.trial);
    Dataset data;
    bool generated = false;
    try {
        GenerateSpec spec;
        spec.dim = task.dim;
        spec.n = task.n;
        spec.alpha = task.alpha;
        spec.adversary = *task.adversary;
        spec.mu_norm = cfg.mu_norm;
        spec.seed = cseed;
        data = run_generate(spec);
        generated = true;
    } catch (const std::exception& e) {
        // Generation failures poison every estimator row of the trial.
        for (std::size_t k = 0; k < cfg.estimators.size(); ++k) {
            ResultRow& row = rows[row_offset + k];
            row.l2_error = std::numeric_limits<double>::quiet_NaN();
            row.notes = "failed:" + std::to_string(error_code_for(e));
        }
    }
    if (!generated) return;

    for (std::size_t k = 0; k < cfg.estimators.size(); ++k) {
        const std::string& name = cfg.estimators[k];
        ResultRow& row = rows[row_offset + k];
        const auto t0 = std::chrono::steady_clock::now();
        try {
            Eigen::VectorXd estimate;
            if (name == "recursive") {
                EstimateReport report = entangled_mean_estimation(
                    data.samples, data.alpha, cfg.algo, rng::derive(cseed, "recursive"),
                    &data.mu);
                estimate = report.estimate;
                row.notes = recursive_notes(report);
            } else {
                auto result =
                    baseline_estimators(data, data.alpha, std::vector<std::string>{name});
                estimate = result.at(name);
                row.notes = "-";
            }
            row.l2_error = (estimate - data.mu).norm();
        } catch (const std::exception& e) {
            row.l2_error = std::numeric_limits<double>::quiet_NaN();
            row.notes = "failed:" + std::to_string(error_code_for(e));
        }
        row.ms = cfg.stable_timing
                     ? 0
                     : std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
    }
}

} // namespace

std::vector<ResultRow> run_sweep(const SweepConfig& cfg) {
    std::vector<SweepTask> tasks;
    for (int dim : cfg.dims) {
        for (long n : cfg.ns) {
            for (double alpha : cfg.alphas) {
                for (const AdversarySpec& adv : cfg.adversaries) {
                    for (int trial = 0; trial < cfg.trials; ++trial) {
                        tasks.push_back(SweepTask{dim, n, alpha, &adv, adv.canonical(),
                                                  trial});
                    }
                }
            }
        }
    }

    std::vector<ResultRow> rows(tasks.size() * cfg.estimators.size());
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const SweepTask& task = tasks[i];
        const std::uint64_t cseed = cell_seed(cfg.root_seed, task.dim, task.n,
                                              task.alpha, task.adversary_name,
                                              task.trial);
        for (std::size_t k = 0; k < cfg.estimators.size(); ++k) {
            ResultRow& row = rows[i * cfg.estimators.size() + k];
            row.dim = task.dim;
            row.n = task.n;
            row.alpha = task.alpha;
            row.adversary = task.adversary_name;
            row.estimator = cfg.estimators[k];
            row.trial = task.trial;
            row.seed = cseed;
        }
    }

    const int workers =
        std::min<int>(worker_count(), static_cast<int>(std::max<std::size_t>(tasks.size(), 1)));
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) break;
            run_sweep_task(cfg, tasks[i], rows, i * cfg.estimators.size());
        }
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (std::thread& th : pool) th.join();
    }

    std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
        return std::tie(a.dim, a.n, a.alpha, a.adversary, a.estimator, a.trial) <
               std::tie(b.dim, b.n, b.alpha, b.adversary, b.estimator, b.trial);
    });

    if (!cfg.out_path.empty()) {
        std::ofstream file(cfg.out_path);
        if (!file) throw ConfigError("out: cannot open '" + cfg.out_path + "'");
        write_csv(rows, file);
        if (!file) throw ConfigError("out: write failed for '" + cfg.out_path + "'");
    }
    return rows;
}

void write_csv(const std::vector<ResultRow>& rows, std::ostream& out) {
    out << "D,N,alpha,adversary,estimator,trial,seed,l2_error,ms,notes\n";
    for (const ResultRow& row : rows) {
        out << row.dim << ',' << row.n << ',' << format_double(row.alpha) << ','
            << row.adversary << ',' << row.estimator << ',' << row.trial << ','
            << row.seed << ',' << format_double(row.l2_error) << ',' << row.ms << ','
            << row.notes << '\n';
    }
}

// --- scoring ----------------------------------------------------------------

double score_estimate(const std::string& estimate_path,
                      const std::string& dataset_path) {
    std::ifstream file(estimate_path);
    if (!file) throw ConfigError("score: cannot open '" + estimate_path + "'");
    json doc;
    try {
        doc = json::parse(file);
    } catch (const json::exception& e) {
        throw ConfigError("score: cannot parse '" + estimate_path + "': " + e.what());
    }

    const json* array = nullptr;
    if (doc.is_array()) {
        array = &doc;
    } else if (doc.is_object() && doc.contains("estimate")) {
        array = &doc.at("estimate");
    }
    if (array == nullptr || !array->is_array()) {
        throw ConfigError("score: estimate file must be an array or carry 'estimate'");
    }

    Dataset data = read_dataset(dataset_path);
    if (!data.has_truth) {
        throw MissingTruthError("score: dataset '" + dataset_path +
                                "' has no ground-truth trailer");
    }
    if (static_cast<int>(array->size()) != data.dim) {
        throw ConfigError("score: estimate has " + std::to_string(array->size()) +
                          " coordinates, dataset dimension is " +
                          std::to_string(data.dim));
    }
    Eigen::VectorXd estimate(data.dim);
    for (int j = 0; j < data.dim; ++j) {
        estimate(j) = as_double((*array)[static_cast<std::size_t>(j)],
                                "estimate[" + std::to_string(j) + "]");
    }
    return (estimate - data.mu).norm();
}

// --- selftest ---------------------------------------------------------------

namespace {

bool nearly(double a, double b, double tol) { return std::abs(a - b) <= tol; }

} // namespace

int selftest(std::ostream& out) {
    int failures = 0;
    auto check = [&](const char* name, bool ok) {
        out << (ok ? "ok " : "FAIL ") << name << "\n";
        if (!ok) ++failures;
    };

    // 1-d estimator pinned values.
    check("shorth.cluster", nearly(shorth_midpoint({0, 1, 2, 100}, 0.5), 0.5, 0.0));
    check("shorth.constant", nearly(shorth_midpoint({5, 5, 5}, 0.7), 5.0, 0.0));
    check("shorth.midrange", nearly(shorth_midpoint({-1, 0, 1}, 1.0), 0.0, 0.0));

    // Error-profile branch structure.
    {
        bool ok = std::isinf(f_delta(1e-5, 100)); // below the feasibility knee
        ok = ok && std::isfinite(f_delta(0.3, 1000));
        ok = ok && f_delta(0.3, 100000) < f_delta(0.3, 10000);
        check("f_delta.branches", ok);
    }

    // Acceptance-probability closed forms.
    {
        const Eigen::MatrixXd eye2 = Eigen::MatrixXd::Identity(2, 2);
        const Eigen::VectorXd zero2 = Eigen::VectorXd::Zero(2);
        bool ok = nearly(acceptance_probability_oracle(eye2, zero2, zero2), 0.5, 1e-12);
        const Eigen::MatrixXd eye10 = Eigen::MatrixXd::Identity(10, 10);
        const Eigen::VectorXd zero10 = Eigen::VectorXd::Zero(10);
        ok = ok && nearly(acceptance_probability_oracle(eye10, zero10, zero10),
                          std::pow(10.0 / 12.0, 5), 1e-12);
        check("acceptance.closed_form", ok);
    }

    // Conditional law at d=2, sigma=I, center one unit from mu.
    {
        const Eigen::MatrixXd eye2 = Eigen::MatrixXd::Identity(2, 2);
        Eigen::VectorXd mu = Eigen::VectorXd::Zero(2);
        Eigen::VectorXd center(2);
        center << 1.0, 0.0;
        ConditionalGaussian cond = conditional_params(eye2, mu, center);
        bool ok = cond.sigma_tilde.isApprox(0.5 * eye2, 1e-12);
        ok = ok && nearly(cond.mu_tilde(0), 0.5, 1e-12) &&
             nearly(cond.mu_tilde(1), 0.0, 1e-12);
        check("conditional.identity_case", ok);
    }

    // Batch splitting partitions the dataset.
    {
        Dataset data;
        data.dim = 3;
        data.n = 101;
        data.samples = Eigen::MatrixXd::Random(101, 3);
        auto [plan, batches] = split_batches(data, 7, 42);
        long total = 0;
        std::vector<int> seen(101, 0);
        for (const Batch& b : batches) {
            total += b.samples.rows();
            for (long row : b.source_rows) seen[static_cast<std::size_t>(row)] += 1;
        }
        bool ok = total == 101 && plan.sizes[0] == 15 && plan.sizes[3] == 14;
        for (int count : seen) ok = ok && count == 1;
        check("split.partition", ok);
    }

    // Noiseless fixed point through the full pipeline.
    {
        const int dim = 8;
        Eigen::VectorXd mu(dim);
        for (int i = 0; i < dim; ++i) mu(i) = 1.0 + i;
        Eigen::MatrixXd samples = mu.transpose().replicate(400, 1);
        AlgoConfig cfg;
        cfg.outer_iterations = 1;
        cfg.base_case_dim = 1;
        cfg.schedule = BatchSchedule::PerIteration;
        EstimateReport report = entangled_mean_estimation(samples, 0.5, cfg, 7, &mu);
        check("pipeline.noiseless_fixed_point",
              (report.estimate - mu).norm() <= 1e-8);
    }

    // Determinism of a small sweep, end to end.
    {
        SweepConfig cfg;
        cfg.dims = {4};
        cfg.ns = {400};
        cfg.alphas = {0.5};
        cfg.adversaries = {AdversarySpec::parse("isotropic:var=100")};
        cfg.trials = 2;
        cfg.estimators = {"recursive", "sample_mean"};
        cfg.root_seed = 11;
        cfg.mu_norm = 3.0;
        cfg.algo.outer_iterations = 1;
        cfg.algo.base_case_dim = 1;
        cfg.algo.schedule = BatchSchedule::PerIteration;
        cfg.stable_timing = true;
        std::ostringstream first, second;
        write_csv(run_sweep(cfg), first);
        write_csv(run_sweep(cfg), second);
        check("sweep.deterministic",
              !first.str().empty() && first.str() == second.str());
    }

    return failures;
}

} // namespace emest
