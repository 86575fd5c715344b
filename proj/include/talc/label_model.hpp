#pragma once

// Log-linear label aggregator over (M, Y).
//
// Each example i and explanation j contribute two features: an accuracy
// indicator 1{M_ij = y_i} and a propensity indicator 1{M_ij != abstain}, with
// one weight of each kind per explanation. The joint over (M, Y) factorizes
// per example, so the posterior over y_i, the partition function and the MAP
// labels all have closed forms; EM learns the weights without gold labels.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "talc/core.hpp"
#include "talc/kernels.hpp"

namespace talc {

struct ModelWeights {
    std::vector<double> accuracy;    // one per explanation
    std::vector<double> propensity;  // one per explanation
    std::vector<double> class_log_prior;  // k entries, held fixed during training
    double l2_lambda = 1e-4;

    /// Zero weights and a uniform prior.
    static ModelWeights zeros(std::size_t m, std::size_t k, double l2_lambda = 1e-4);

    std::size_t num_explanations() const { return accuracy.size(); }
    std::size_t num_classes() const { return class_log_prior.size(); }
    /// Throws ValidationError on size mismatch or non-finite entries.
    void check(std::size_t m, std::size_t k) const;
    /// Sum of squares of the 2m learnable entries.
    double squared_norm() const;

    friend bool operator==(const ModelWeights&, const ModelWeights&) = default;
};

/// Per-example class distributions, n x k row-major.
struct Posterior {
    std::size_t num_classes = 0;
    std::vector<double> probs;

    std::size_t rows() const { return num_classes == 0 ? 0 : probs.size() / num_classes; }
    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(probs).subspan(i * num_classes, num_classes);
    }
};

struct Prediction {
    std::string example_id;
    int label = 0;
    /// Set when the winning class was tied with another and chosen by lowest index.
    bool tie = false;
    std::vector<double> posterior;
};

enum class InitPolicy {
    /// First E-step uses majority-vote one-hot posteriors smoothed by epsilon.
    majority_vote,
    /// Accuracy and propensity weights all start at 1.0.
    constant,
};

std::string to_string(InitPolicy p);
InitPolicy init_policy_from_string(const std::string& s);

struct FitOptions {
    InitPolicy init = InitPolicy::majority_vote;
    double init_smoothing = 0.01;
    std::size_t max_iters = 500;
    /// Stop once |delta log-likelihood| / n falls below this.
    double tol = 1e-6;
    /// Initial multiplier of the Newton direction in the M-step; halved on decrease.
    double step_size = 1.0;
    double l2_lambda = 1e-4;
    /// Constant log prior over classes; empty means uniform.
    std::vector<double> class_log_prior;
    kernels::Backend backend = kernels::Backend::openmp;
};

struct TrainingReport {
    std::size_t iterations = 0;
    std::vector<double> log_likelihood_trace;
    bool converged = false;
    ModelWeights final_weights;
    /// Columns in which every cell abstains; kept, and their weights are held
    /// near zero only by the L2 term.
    std::vector<std::size_t> abstain_only_columns;
};

/// Unnormalized log joint of one example: prior[y] + sum_j (acc_j 1{M_j = y} + prop_j 1{M_j != abstain}).
double score(std::span<const int> row, int y, const ModelWeights& w);

Posterior posterior(const LabelingMatrix& matrix, const ModelWeights& w,
                    kernels::Backend backend = kernels::Backend::openmp);

/// log Z of the joint over all (M, Y) configurations for n examples.
double log_partition(const ModelWeights& w, std::size_t n, std::size_t k);

/// sum_i log sum_y exp(score_i(y)) - log Z - lambda * ||w||^2.
double marginal_log_likelihood(const LabelingMatrix& matrix, const ModelWeights& w,
                               kernels::Backend backend = kernels::Backend::openmp);

struct Gradient {
    std::vector<double> accuracy;
    std::vector<double> propensity;
    /// Derivative with respect to the class log prior. Training holds the prior
    /// fixed, so this is reported but excluded from norm().
    std::vector<double> class_log_prior;

    double norm() const;
};

Gradient gradient(const LabelingMatrix& matrix, const ModelWeights& w,
                  kernels::Backend backend = kernels::Backend::openmp);

/// Expected accuracy indicator of one cell under the model: e^{a+p} / D.
double model_agree_probability(double acc, double prop, std::size_t k);
/// Expected propensity indicator of one cell under the model: (e^{a+p} + (k-1)e^p) / D.
double model_label_probability(double acc, double prop, std::size_t k);

/// EM on the marginal likelihood. Throws ValidationError for an all-abstain
/// matrix and NumericError when the likelihood stops being finite.
TrainingReport fit_em(const LabelingMatrix& matrix, const FitOptions& options = {});

/// Exact per-example argmax of the posterior (ties to lowest class, flagged).
std::vector<Prediction> map_exact(const LabelingMatrix& matrix, const ModelWeights& w,
                                  kernels::Backend backend = kernels::Backend::openmp);

struct GibbsOptions {
    std::size_t burn_in = 100;
    std::size_t samples = 500;
    std::uint64_t seed = 0;
};

/// Mode of Gibbs samples per example. Under this model each full conditional
/// is the example's own posterior, so examples are sampled independently.
std::vector<Prediction> gibbs_map(const LabelingMatrix& matrix, const ModelWeights& w,
                                  const GibbsOptions& options = {},
                                  kernels::Backend backend = kernels::Backend::openmp);

/// Weights JSON keyed by explanation id.
std::string serialize_weights_json(const ModelWeights& w, std::span<const std::string> explanation_ids,
                                   InitPolicy init, std::uint64_t seed);
/// Reads weights back, ordered by explanation_ids.
ModelWeights parse_weights_json(std::string_view json_text, std::span<const std::string> explanation_ids);

}  // namespace talc
