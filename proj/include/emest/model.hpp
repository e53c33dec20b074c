#ifndef EMEST_MODEL_HPP
#define EMEST_MODEL_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace emest {

// Per-sample covariance in the factored form
//     Sigma = iso * I + spike * U * U^T
// with U a d x r matrix of orthonormal columns (r may be 0). Every covariance
// the generator produces fits this shape, which keeps sampling O(d * r) and
// makes eigenvalue checks trivial: the spectrum is {iso (x d-r), iso + spike (x r)}.
struct CovDescriptor {
    double iso = 1.0;
    double spike = 0.0;
    // When axis >= 0 the single factor is the standard basis vector e_axis and
    // `factors` stays empty; otherwise `factors` holds U explicitly.
    int axis = -1;
    Eigen::MatrixXd factors;

    int rank() const;
    double max_eigenvalue() const { return spike > 0.0 ? iso + spike : iso; }
    Eigen::MatrixXd dense(int dim) const;
};

// How inlier covariances are drawn. `Identity` fixes Sigma = I;
// `UniformScale` draws Sigma = s * I with s uniform on [0.5, 1].
enum class InlierRule { Identity, UniformScale };

// Outlier contamination families understood by the generator.
enum class AdversaryKind {
    Identity,         // outliers drawn like identity-covariance inliers
    IsotropicScale,   // Sigma = var * I
    AnisotropicLowRank, // Sigma = I + var * U U^T, U random orthonormal d x rank
    OneDHardEmbed     // Sigma = var * e_axis e_axis^T (zero everywhere else)
};

struct AdversarySpec {
    AdversaryKind kind = AdversaryKind::Identity;
    double var = 1.0; // spike / scale variance, where applicable
    int rank = 1;     // AnisotropicLowRank only
    int axis = 0;     // OneDHardEmbed only (0-based coordinate)
    InlierRule inlier_rule = InlierRule::Identity;

    // Parse "name:key=val,key=val" (e.g. "isotropic:var=1e4"). Throws
    // ConfigError on unknown names/keys or out-of-range values.
    static AdversarySpec parse(const std::string& text);
    // Stable canonical rendering; used in CSV rows and seed derivation.
    std::string canonical() const;
};

struct ModelParams {
    int dim = 1;
    long n = 0;
    double alpha = 1.0;
    Eigen::VectorXd mu; // resized to `dim` with zeros if left empty
};

// A generated (or loaded) sample set. Ground truth (mu, inlier mask,
// covariance descriptors) is optional: datasets loaded from files without a
// truth trailer carry only the samples.
struct Dataset {
    int dim = 0;
    long n = 0;
    double alpha = 1.0;
    std::uint64_t seed = 0;
    Eigen::MatrixXd samples; // n x dim, row-major semantics (row = sample)

    bool has_truth = false;
    Eigen::VectorXd mu;
    std::vector<std::uint8_t> inlier_mask; // 1 = inlier
    // Only populated by the in-process generator; never serialized.
    std::vector<CovDescriptor> covariances;

    long inlier_count() const;
};

Dataset generate_dataset(const ModelParams& params, const AdversarySpec& adversary,
                         std::uint64_t seed);

// Averages each sample with an independent standard normal draw and rescales
// by 1/sqrt(2), mapping every covariance Sigma to (Sigma + I) / 2 and the mean
// to mu / sqrt(2). Inlier status is preserved.
Dataset preprocess_half_identity(const Dataset& data, std::uint64_t seed);

// Plain-text serialization. Layout:
//   # emest-v1 D=<int> N=<int> alpha=<float> seed=<int>
//   <comma-separated sample row> x N
// and, when truth is included,
//   # truth
//   mu,<v1>,...,<vD>
//   inliers,<m1>,...,<mN>
void write_dataset(const Dataset& data, const std::string& path, bool include_truth);
Dataset read_dataset(const std::string& path);

// Batch bookkeeping for sample splitting.
struct BatchPlan {
    int t = 0;
    std::vector<long> sizes;           // per batch, first N mod t get one extra
    std::vector<long> permutation;     // row order before slicing
};

struct Batch {
    Eigen::MatrixXd samples;
    std::vector<std::uint8_t> inlier_mask; // empty when the dataset has no truth
    std::vector<long> source_rows;
};

// Uniformly permute the rows and slice into t contiguous batches.
std::pair<BatchPlan, std::vector<Batch>> split_batches(const Dataset& data, int t,
                                                       std::uint64_t seed);

} // namespace emest

#endif
