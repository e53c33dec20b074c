#include "emest/model.hpp"

#include "emest/errors.hpp"
#include "emest/rng.hpp"
#include "emest/util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace emest {

int CovDescriptor::rank() const {
    if (spike == 0.0) return 0;
    if (axis >= 0) return 1;
    return static_cast<int>(factors.cols());
}

Eigen::MatrixXd CovDescriptor::dense(int dim) const {
    Eigen::MatrixXd sigma = iso * Eigen::MatrixXd::Identity(dim, dim);
    if (spike != 0.0) {
        if (axis >= 0) {
            sigma(axis, axis) += spike;
        } else {
            sigma += spike * factors * factors.transpose();
        }
    }
    return sigma;
}

namespace {

std::vector<std::string> split_on(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::string current;
    for (char c : text) {
        if (c == sep) {
            parts.push_back(current);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    parts.push_back(current);
    return parts;
}

} // namespace

AdversarySpec AdversarySpec::parse(const std::string& text) {
    if (text.empty()) throw ConfigError("adversary: empty specification");
    auto colon = text.find(':');
    std::string name = text.substr(0, colon);
    AdversarySpec spec;
    if (name == "identity") {
        spec.kind = AdversaryKind::Identity;
    } else if (name == "isotropic") {
        spec.kind = AdversaryKind::IsotropicScale;
    } else if (name == "lowrank") {
        spec.kind = AdversaryKind::AnisotropicLowRank;
    } else if (name == "onedhard") {
        spec.kind = AdversaryKind::OneDHardEmbed;
    } else {
        throw ConfigError("adversary: unknown family '" + name + "'");
    }

    if (colon != std::string::npos) {
        for (const std::string& kv : split_on(text.substr(colon + 1), ',')) {
            if (kv.empty()) continue;
            auto eq = kv.find('=');
            if (eq == std::string::npos) {
                throw ConfigError("adversary: expected key=value, got '" + kv + "'");
            }
            std::string key = kv.substr(0, eq);
            std::string val = kv.substr(eq + 1);
            try {
                if (key == "var") {
                    spec.var = parse_double(val, "adversary.var");
                } else if (key == "rank") {
                    spec.rank = static_cast<int>(parse_long(val, "adversary.rank"));
                } else if (key == "axis") {
                    spec.axis = static_cast<int>(parse_long(val, "adversary.axis"));
                } else if (key == "inlier") {
                    if (val == "identity") {
                        spec.inlier_rule = InlierRule::Identity;
                    } else if (val == "uniform") {
                        spec.inlier_rule = InlierRule::UniformScale;
                    } else {
                        throw ConfigError("adversary.inlier: expected identity|uniform");
                    }
                } else {
                    throw ConfigError("adversary: unknown key '" + key + "'");
                }
            } catch (const std::runtime_error& e) {
                throw ConfigError(e.what());
            }
        }
    }
    if (spec.var < 0.0) throw ConfigError("adversary.var: must be nonnegative");
    if (spec.rank < 1) throw ConfigError("adversary.rank: must be >= 1");
    if (spec.axis < 0) throw ConfigError("adversary.axis: must be >= 0");
    return spec;
}

std::string AdversarySpec::canonical() const {
    std::string out;
    switch (kind) {
        case AdversaryKind::Identity: out = "identity"; break;
        case AdversaryKind::IsotropicScale:
            out = "isotropic:var=" + format_double(var);
            break;
        case AdversaryKind::AnisotropicLowRank:
            out = "lowrank:var=" + format_double(var) + ",rank=" + std::to_string(rank);
            break;
        case AdversaryKind::OneDHardEmbed:
            out = "onedhard:var=" + format_double(var) + ",axis=" + std::to_string(axis);
            break;
    }
    if (inlier_rule == InlierRule::UniformScale) {
        out += (kind == AdversaryKind::Identity) ? ":inlier=uniform" : ",inlier=uniform";
    }
    return out;
}

long Dataset::inlier_count() const {
    return std::count(inlier_mask.begin(), inlier_mask.end(), std::uint8_t{1});
}

namespace {

// Draw a d x r matrix with orthonormal columns, uniformly from the Stiefel
// manifold (QR of a Gaussian matrix, with sign-fixed diagonal).
Eigen::MatrixXd random_orthonormal(int dim, int r, std::mt19937_64& eng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd g(dim, r);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < r; ++j) g(i, j) = gauss(eng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, r);
    Eigen::MatrixXd rr = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
    for (int j = 0; j < r; ++j) {
        if (rr(j, j) < 0.0) q.col(j) = -q.col(j);
    }
    return q;
}

// x = mu + sqrt(iso) * (g - U U^T g) + sqrt(iso + spike) * U h draws exactly
// from N(mu, iso*I + spike*U U^T) using d + r standard normals.
Eigen::VectorXd draw_sample(const Eigen::VectorXd& mu, const CovDescriptor& cov,
                            std::mt19937_64& eng) {
    const int dim = static_cast<int>(mu.size());
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd g(dim);
    for (int i = 0; i < dim; ++i) g(i) = gauss(eng);

    if (cov.spike == 0.0) {
        return mu + std::sqrt(cov.iso) * g;
    }

    const double along = std::sqrt(cov.iso + cov.spike);
    const double ortho = std::sqrt(cov.iso);
    if (cov.axis >= 0) {
        double h = gauss(eng);
        Eigen::VectorXd x = mu + ortho * g;
        x(cov.axis) = mu(cov.axis) + along * h;
        return x;
    }
    const int r = static_cast<int>(cov.factors.cols());
    Eigen::VectorXd h(r);
    for (int j = 0; j < r; ++j) h(j) = gauss(eng);
    Eigen::VectorXd g_par = cov.factors * (cov.factors.transpose() * g);
    return mu + ortho * (g - g_par) + along * (cov.factors * h);
}

CovDescriptor outlier_covariance(const AdversarySpec& adversary, int dim,
                                 std::mt19937_64& eng) {
    CovDescriptor cov;
    switch (adversary.kind) {
        case AdversaryKind::Identity:
            break;
        case AdversaryKind::IsotropicScale:
            cov.iso = adversary.var;
            break;
        case AdversaryKind::AnisotropicLowRank:
            cov.iso = 1.0;
            cov.spike = adversary.var;
            cov.factors = random_orthonormal(dim, adversary.rank, eng);
            break;
        case AdversaryKind::OneDHardEmbed:
            cov.iso = 0.0;
            cov.spike = adversary.var;
            cov.axis = adversary.axis;
            break;
    }
    return cov;
}

} // namespace

Dataset generate_dataset(const ModelParams& params, const AdversarySpec& adversary,
                         std::uint64_t seed) {
    if (params.dim < 1) throw ConfigError("generate: dim must be >= 1");
    if (params.n < 1) throw ConfigError("generate: n must be >= 1");
    if (!(params.alpha > 0.0 && params.alpha <= 1.0)) {
        throw ConfigError("generate: alpha must be in (0, 1]");
    }
    if (adversary.kind == AdversaryKind::AnisotropicLowRank &&
        adversary.rank > params.dim) {
        throw ConfigError("adversary.rank: exceeds dimension");
    }
    if (adversary.kind == AdversaryKind::OneDHardEmbed &&
        adversary.axis >= params.dim) {
        throw ConfigError("adversary.axis: exceeds dimension");
    }

    Eigen::VectorXd mu = params.mu;
    if (mu.size() == 0) {
        mu = Eigen::VectorXd::Zero(params.dim);
    } else if (mu.size() != params.dim) {
        throw ConfigError("generate: mu has wrong dimension");
    }

    const long n = params.n;
    const long inliers = std::clamp(ceil_count(params.alpha, n), 1L, n);

    Dataset data;
    data.dim = params.dim;
    data.n = n;
    data.alpha = params.alpha;
    data.seed = seed;
    data.has_truth = true;
    data.mu = mu;
    data.samples.resize(n, params.dim);
    data.inlier_mask.assign(n, 0);
    data.covariances.resize(n);

    // Inlier positions are a uniformly random subset so batch splits can't
    // accidentally rely on placement.
    std::vector<long> order(n);
    std::iota(order.begin(), order.end(), 0L);
    auto place_eng = rng::engine(seed, "placement");
    std::shuffle(order.begin(), order.end(), place_eng);
    for (long i = 0; i < inliers; ++i) data.inlier_mask[order[i]] = 1;

    auto cov_eng = rng::engine(seed, "covariances");
    auto sample_eng = rng::engine(seed, "samples");
    std::uniform_real_distribution<double> half_to_one(0.5, 1.0);

    for (long i = 0; i < n; ++i) {
        CovDescriptor cov;
        if (data.inlier_mask[i]) {
            if (adversary.inlier_rule == InlierRule::UniformScale) {
                cov.iso = half_to_one(cov_eng);
            }
        } else {
            cov = outlier_covariance(adversary, params.dim, cov_eng);
        }
        data.samples.row(i) = draw_sample(mu, cov, sample_eng).transpose();
        data.covariances[i] = std::move(cov);
    }
    return data;
}

Dataset preprocess_half_identity(const Dataset& data, std::uint64_t seed) {
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    Dataset out = data;
    out.seed = rng::derive(seed, "half_identity");
    auto eng = rng::engine(seed, "half_identity");
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (long i = 0; i < data.n; ++i) {
        for (int j = 0; j < data.dim; ++j) {
            out.samples(i, j) = (data.samples(i, j) + gauss(eng)) * inv_sqrt2;
        }
    }
    if (out.has_truth) out.mu = data.mu * inv_sqrt2;
    for (CovDescriptor& cov : out.covariances) {
        cov.iso = 0.5 * (cov.iso + 1.0);
        cov.spike *= 0.5;
    }
    return out;
}

void write_dataset(const Dataset& data, const std::string& path, bool include_truth) {
    std::ofstream out(path);
    if (!out) throw ConfigError("write_dataset: cannot open '" + path + "'");
    out << "# emest-v1 D=" << data.dim << " N=" << data.n
        << " alpha=" << format_double(data.alpha) << " seed=" << data.seed << "\n";
    for (long i = 0; i < data.n; ++i) {
        for (int j = 0; j < data.dim; ++j) {
            if (j) out << ',';
            out << format_double(data.samples(i, j));
        }
        out << '\n';
    }
    if (include_truth) {
        if (!data.has_truth) {
            throw MissingTruthError("write_dataset: dataset has no ground truth");
        }
        out << "# truth\n";
        out << "mu";
        for (int j = 0; j < data.dim; ++j) out << ',' << format_double(data.mu(j));
        out << '\n';
        out << "inliers";
        for (long i = 0; i < data.n; ++i) out << ',' << int(data.inlier_mask[i]);
        out << '\n';
    }
    if (!out) throw ConfigError("write_dataset: write failed for '" + path + "'");
}

Dataset read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("read_dataset: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("read_dataset: empty file");

    Dataset data;
    {
        std::istringstream header(line);
        std::string marker, version;
        header >> marker >> version;
        if (marker != "#" || version != "emest-v1") {
            throw ConfigError("read_dataset: missing 'emest-v1' header");
        }
        bool saw_d = false, saw_n = false, saw_alpha = false;
        std::string field;
        while (header >> field) {
            auto eq = field.find('=');
            if (eq == std::string::npos) {
                throw ConfigError("read_dataset: malformed header field '" + field + "'");
            }
            std::string key = field.substr(0, eq);
            std::string val = field.substr(eq + 1);
            try {
                if (key == "D") {
                    data.dim = static_cast<int>(parse_long(val, "header.D"));
                    saw_d = true;
                } else if (key == "N") {
                    data.n = parse_long(val, "header.N");
                    saw_n = true;
                } else if (key == "alpha") {
                    data.alpha = parse_double(val, "header.alpha");
                    saw_alpha = true;
                } else if (key == "seed") {
                    data.seed = parse_u64(val, "header.seed");
                } else {
                    throw ConfigError("read_dataset: unknown header key '" + key + "'");
                }
            } catch (const std::runtime_error& e) {
                throw ConfigError(e.what());
            }
        }
        if (!saw_d || !saw_n || !saw_alpha) {
            throw ConfigError("read_dataset: header must carry D, N and alpha");
        }
        if (data.dim < 1 || data.n < 1) {
            throw ConfigError("read_dataset: header D and N must be positive");
        }
    }

    data.samples.resize(data.n, data.dim);
    for (long i = 0; i < data.n; ++i) {
        if (!std::getline(in, line)) {
            throw ConfigError("read_dataset: expected " + std::to_string(data.n) +
                              " sample rows, file ended at row " + std::to_string(i));
        }
        auto cells = split_on(line, ',');
        if (static_cast<int>(cells.size()) != data.dim) {
            throw ConfigError("read_dataset: row " + std::to_string(i) + " has " +
                              std::to_string(cells.size()) + " values, expected " +
                              std::to_string(data.dim));
        }
        for (int j = 0; j < data.dim; ++j) {
            try {
                data.samples(i, j) = parse_double(cells[j], "sample row");
            } catch (const std::runtime_error& e) {
                throw ConfigError(e.what());
            }
        }
    }

    if (std::getline(in, line)) {
        if (line != "# truth") {
            throw ConfigError("read_dataset: unexpected trailer line '" + line + "'");
        }
        if (!std::getline(in, line)) throw ConfigError("read_dataset: truncated truth block");
        auto mu_cells = split_on(line, ',');
        if (mu_cells.empty() || mu_cells[0] != "mu" ||
            static_cast<int>(mu_cells.size()) != data.dim + 1) {
            throw ConfigError("read_dataset: malformed mu line in truth block");
        }
        data.mu.resize(data.dim);
        for (int j = 0; j < data.dim; ++j) {
            try {
                data.mu(j) = parse_double(mu_cells[j + 1], "truth.mu");
            } catch (const std::runtime_error& e) {
                throw ConfigError(e.what());
            }
        }
        if (!std::getline(in, line)) throw ConfigError("read_dataset: truncated truth block");
        auto mask_cells = split_on(line, ',');
        if (mask_cells.empty() || mask_cells[0] != "inliers" ||
            static_cast<long>(mask_cells.size()) != data.n + 1) {
            throw ConfigError("read_dataset: malformed inliers line in truth block");
        }
        data.inlier_mask.assign(data.n, 0);
        for (long i = 0; i < data.n; ++i) {
            const std::string& cell = mask_cells[i + 1];
            if (cell == "1") {
                data.inlier_mask[i] = 1;
            } else if (cell != "0") {
                throw ConfigError("read_dataset: inlier mask entries must be 0 or 1");
            }
        }
        data.has_truth = true;
    }
    return data;
}

std::pair<BatchPlan, std::vector<Batch>> split_batches(const Dataset& data, int t,
                                                       std::uint64_t seed) {
    if (t < 1) throw ConfigError("split_batches: t must be >= 1");
    if (t > data.n) throw ConfigError("split_batches: t exceeds sample count");

    BatchPlan plan;
    plan.t = t;
    plan.permutation.resize(data.n);
    std::iota(plan.permutation.begin(), plan.permutation.end(), 0L);
    auto eng = rng::engine(seed, "batch_perm");
    std::shuffle(plan.permutation.begin(), plan.permutation.end(), eng);

    const long base = data.n / t;
    const long extra = data.n % t;
    plan.sizes.assign(t, base);
    for (long b = 0; b < extra; ++b) plan.sizes[b] += 1;

    std::vector<Batch> batches(t);
    long cursor = 0;
    for (int b = 0; b < t; ++b) {
        Batch& batch = batches[b];
        const long size = plan.sizes[b];
        batch.samples.resize(size, data.dim);
        batch.source_rows.resize(size);
        if (data.has_truth) batch.inlier_mask.resize(size);
        for (long i = 0; i < size; ++i) {
            const long row = plan.permutation[cursor + i];
            batch.samples.row(i) = data.samples.row(row);
            batch.source_rows[i] = row;
            if (data.has_truth) batch.inlier_mask[i] = data.inlier_mask[row];
        }
        cursor += size;
    }
    return {std::move(plan), std::move(batches)};
}

} // namespace emest
