// emest: dataset generation, estimation runs, benchmark sweeps and scoring
// for high-dimensional mean estimation with per-sample covariances.
//
// Exit codes: 0 success, 2 config error, 3 infeasible sample budget,
// 4 numerical failure, 5 missing ground truth.

#include "emest/errors.hpp"
#include "emest/harness.hpp"
#include "emest/model.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

using emest::json;

json load_json_file(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw emest::ConfigError("config: cannot open '" + path + "'");
    try {
        return json::parse(file);
    } catch (const json::exception& e) {
        throw emest::ConfigError("config: cannot parse '" + path + "': " + e.what());
    }
}

void print_error(const std::string& kind, const std::string& message) {
    json err;
    err["error"] = kind;
    err["message"] = message;
    std::cerr << err.dump() << "\n";
}

struct GenerateArgs {
    int dim = 1;
    long n = 0;
    double alpha = 1.0;
    std::string adversary = "identity";
    std::uint64_t seed = 0;
    double mu_norm = 0.0;
    std::string out;
    bool no_truth = false;
};

int cmd_generate(const GenerateArgs& args) {
    emest::GenerateSpec spec;
    spec.dim = args.dim;
    spec.n = args.n;
    spec.alpha = args.alpha;
    spec.adversary = emest::AdversarySpec::parse(args.adversary);
    spec.seed = args.seed;
    spec.mu_norm = args.mu_norm;
    emest::Dataset data = emest::run_generate(spec);
    emest::write_dataset(data, args.out, !args.no_truth);
    std::cout << "wrote " << data.n << " samples (D=" << data.dim
              << ", inliers=" << data.inlier_count() << ") to " << args.out << "\n";
    return 0;
}

int cmd_estimate(const std::string& config_path, std::optional<std::uint64_t> seed,
                 const std::string& out_override) {
    json config = load_json_file(config_path);
    if (seed) config["seed"] = *seed;
    if (!out_override.empty()) config["out"] = out_override;
    json report = emest::run_single(config);
    std::cout << report.dump(2) << "\n";
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_override) {
    emest::SweepConfig cfg = emest::SweepConfig::from_json(load_json_file(config_path));
    if (!out_override.empty()) cfg.out_path = out_override;
    std::vector<emest::ResultRow> rows = emest::run_sweep(cfg);
    if (cfg.out_path.empty()) {
        emest::write_csv(rows, std::cout);
    } else {
        std::cout << "wrote " << rows.size() << " rows to " << cfg.out_path << "\n";
    }
    return 0;
}

int cmd_score(const std::string& estimate_path, const std::string& dataset_path) {
    const double error = emest::score_estimate(estimate_path, dataset_path);
    std::printf("%.12g\n", error);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mean estimation benchmark harness"};
    app.require_subcommand(1);

    GenerateArgs gen;
    CLI::App* generate = app.add_subcommand("generate", "generate a dataset file");
    generate->add_option("--dim", gen.dim, "ambient dimension")->required();
    generate->add_option("--n", gen.n, "number of samples")->required();
    generate->add_option("--alpha", gen.alpha, "inlier fraction in (0, 1]")->required();
    generate->add_option("--adversary", gen.adversary,
                         "outlier family, name:key=value,... (identity, "
                         "isotropic:var=V, lowrank:var=V,rank=R, "
                         "onedhard:var=V,axis=A; append inlier=uniform to draw "
                         "inlier scales from [0.5, 1])");
    generate->add_option("--seed", gen.seed, "generation seed");
    generate->add_option("--mu-norm", gen.mu_norm,
                         "norm of a seeded random true mean (0 = origin)");
    generate->add_option("--out", gen.out, "output path")->required();
    generate->add_flag("--no-truth", gen.no_truth, "omit the ground-truth trailer");

    std::string est_config, est_out;
    std::optional<std::uint64_t> est_seed;
    CLI::App* estimate = app.add_subcommand("estimate", "run one estimation job");
    estimate->add_option("--config", est_config, "JSON job config")->required();
    estimate->add_option("--seed", est_seed, "override the config seed");
    estimate->add_option("--out", est_out, "also write the JSON report here");

    std::string sweep_config, sweep_out;
    CLI::App* sweep = app.add_subcommand("sweep", "run a benchmark sweep to CSV");
    sweep->add_option("--config", sweep_config, "JSON sweep config")->required();
    sweep->add_option("--out", sweep_out, "override the CSV output path");

    std::string score_estimate_path, score_dataset_path;
    CLI::App* score = app.add_subcommand("score", "l2 error of a stored estimate");
    score->add_option("--estimate", score_estimate_path, "JSON estimate or report file")
        ->required();
    score->add_option("--dataset", score_dataset_path, "truth-bearing dataset file")
        ->required();

    CLI::App* selftest = app.add_subcommand("selftest", "run the deterministic invariant suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        return 2;
    }

    try {
        if (generate->parsed()) return cmd_generate(gen);
        if (estimate->parsed()) return cmd_estimate(est_config, est_seed, est_out);
        if (sweep->parsed()) return cmd_sweep(sweep_config, sweep_out);
        if (score->parsed()) return cmd_score(score_estimate_path, score_dataset_path);
        if (selftest->parsed()) {
            const int failures = emest::selftest(std::cout);
            if (failures > 0) {
                std::cout << failures << " check(s) failed\n";
                return 1;
            }
            std::cout << "all checks passed\n";
            return 0;
        }
    } catch (const emest::InfeasibleError& e) {
        print_error("infeasible", std::string(e.what()) +
                                      " (minimal feasible N: " +
                                      std::to_string(e.min_feasible_n) + ")");
        return 3;
    } catch (const emest::MissingTruthError& e) {
        print_error("missing_truth", e.what());
        return 5;
    } catch (const emest::ConfigError& e) {
        print_error("config", e.what());
        return 2;
    } catch (const emest::NumericalError& e) {
        print_error("numerical", e.what());
        return 4;
    } catch (const std::exception& e) {
        print_error("internal", e.what());
        return 4;
    }
    return 0;
}
