#include "talc/label_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string_view>

#include <json.hpp>

#include "talc/error.hpp"

namespace talc {

namespace {

using json = nlohmann::ordered_json;

double log_sum_exp(std::span<const double> v) {
    const double mx = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

// log(e^{a+p} + (k-1) e^p + 1): the three outcomes of one cell given y are
// agree, disagree (k-1 ways) and abstain.
double log_cell_norm(double acc, double prop, std::size_t k) {
    const std::array<double, 3> terms{acc + prop, std::log(static_cast<double>(k - 1)) + prop, 0.0};
    return log_sum_exp(terms);
}

struct CellProbs {
    double agree;
    double disagree;
    double abstain;
};

CellProbs cell_probs(double acc, double prop, std::size_t k) {
    const double lz = log_cell_norm(acc, prop, k);
    return {std::exp(acc + prop - lz), std::exp(std::log(static_cast<double>(k - 1)) + prop - lz), std::exp(-lz)};
}

kernels::Shape shape_of(const LabelingMatrix& matrix) {
    return {matrix.rows(), matrix.cols(), matrix.num_classes()};
}

std::vector<double> label_counts(const LabelingMatrix& matrix) {
    std::vector<double> counts(matrix.cols(), 0.0);
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        auto row = matrix.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (row[j] != kAbstain) counts[j] += 1.0;
        }
    }
    return counts;
}

// Class scores without the propensity terms (they do not depend on y), then
// normalized in place. Returns the per-row log normalizers.
std::vector<double> normalized_scores(const LabelingMatrix& matrix, const ModelWeights& w, kernels::Backend backend,
                                      std::vector<double>& probs) {
    const auto shape = shape_of(matrix);
    probs.assign(shape.n * shape.k, 0.0);
    std::vector<double> log_norm(shape.n, 0.0);
    kernels::class_scores(backend, matrix.cells(), shape, w.accuracy, w.class_log_prior, probs);
    kernels::softmax_rows(backend, probs, shape, log_norm);
    return log_norm;
}

void check_compatible(const LabelingMatrix& matrix, const ModelWeights& w) {
    w.check(matrix.cols(), matrix.num_classes());
}

// Expected complete-data objective restricted to one column.
double column_objective(double acc, double prop, double agree_mass, double labeled, double n, std::size_t k,
                        double lambda) {
    return acc * agree_mass + prop * labeled - n * log_cell_norm(acc, prop, k) - lambda * (acc * acc + prop * prop);
}

// Damped Newton ascent on one column's objective; the objective is concave
// and two-dimensional, so this converges in a handful of steps.
void maximize_column(double agree_mass, double labeled, double n, std::size_t k, double lambda, double step_size,
                     double& acc, double& prop) {
    constexpr int kMaxNewton = 100;
    const double grad_tol = 1e-10 * (n + 1.0);
    for (int it = 0; it < kMaxNewton; ++it) {
        const auto pr = cell_probs(acc, prop, k);
        const double ga = agree_mass - n * pr.agree - 2.0 * lambda * acc;
        const double gp = labeled - n * (pr.agree + pr.disagree) - 2.0 * lambda * prop;
        if (std::max(std::abs(ga), std::abs(gp)) <= grad_tol) break;

        // Negative Hessian: n * Cov(features) + 2 lambda I.
        const double haa = n * pr.agree * (1.0 - pr.agree) + 2.0 * lambda;
        const double hpp = n * pr.abstain * (1.0 - pr.abstain) + 2.0 * lambda;
        const double hap = n * pr.agree * pr.abstain;
        const double det = haa * hpp - hap * hap;
        double da = 0.0;
        double dp = 0.0;
        if (det > 1e-300 && std::isfinite(det)) {
            da = (hpp * ga - hap * gp) / det;
            dp = (haa * gp - hap * ga) / det;
        } else {
            da = ga / std::max(n, 1.0);
            dp = gp / std::max(n, 1.0);
        }

        const double current = column_objective(acc, prop, agree_mass, labeled, n, k, lambda);
        double t = step_size;
        bool accepted = false;
        while (t > 1e-12) {
            const double na = acc + t * da;
            const double np = prop + t * dp;
            const double cand = column_objective(na, np, agree_mass, labeled, n, k, lambda);
            if (std::isfinite(cand) && cand >= current) {
                accepted = (na != acc || np != prop);
                acc = na;
                prop = np;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) break;
    }
}

void m_step(std::span<const double> agree_mass, std::span<const double> labeled, double n, std::size_t k,
            double lambda, double step_size, ModelWeights& w) {
    for (std::size_t j = 0; j < agree_mass.size(); ++j) {
        maximize_column(agree_mass[j], labeled[j], n, k, lambda, step_size, w.accuracy[j], w.propensity[j]);
    }
}

// Majority-vote one-hot rows smoothed towards uniform; all-abstain rows are uniform.
std::vector<double> majority_vote_posterior(const LabelingMatrix& matrix, double smoothing) {
    const std::size_t k = matrix.num_classes();
    std::vector<double> q(matrix.rows() * k, 1.0 / static_cast<double>(k));
    std::vector<double> votes(k);
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        std::fill(votes.begin(), votes.end(), 0.0);
        bool any = false;
        for (int c : matrix.row(i)) {
            if (c != kAbstain) {
                votes[static_cast<std::size_t>(c)] += 1.0;
                any = true;
            }
        }
        if (!any) continue;
        const std::size_t winner = argmax_lowest(votes);
        for (std::size_t y = 0; y < k; ++y) {
            q[i * k + y] = (y == winner ? 1.0 - smoothing : 0.0) + smoothing / static_cast<double>(k);
        }
    }
    return q;
}

}  // namespace

ModelWeights ModelWeights::zeros(std::size_t m, std::size_t k, double l2_lambda) {
    ModelWeights w;
    w.accuracy.assign(m, 0.0);
    w.propensity.assign(m, 0.0);
    w.class_log_prior.assign(k, 0.0);
    w.l2_lambda = l2_lambda;
    return w;
}

void ModelWeights::check(std::size_t m, std::size_t k) const {
    if (accuracy.size() != m || propensity.size() != m) {
        throw ValidationError("weights cover " + std::to_string(accuracy.size()) + " explanations, matrix has " +
                              std::to_string(m));
    }
    if (class_log_prior.size() != k) throw ValidationError("class prior size does not match the label space");
    auto finite = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    if (!finite(accuracy) || !finite(propensity) || !finite(class_log_prior) || !std::isfinite(l2_lambda)) {
        throw ValidationError("weights must be finite");
    }
    if (l2_lambda < 0.0) throw ValidationError("l2_lambda must be >= 0");
}

double ModelWeights::squared_norm() const {
    double s = 0.0;
    for (double a : accuracy) s += a * a;
    for (double p : propensity) s += p * p;
    return s;
}

std::string to_string(InitPolicy p) {
    return p == InitPolicy::majority_vote ? "majority_vote" : "constant";
}

InitPolicy init_policy_from_string(const std::string& s) {
    if (s == "majority_vote" || s == "mv") return InitPolicy::majority_vote;
    if (s == "constant") return InitPolicy::constant;
    throw ValidationError("unknown init policy '" + s + "'");
}

double score(std::span<const int> row, int y, const ModelWeights& w) {
    if (row.size() != w.num_explanations()) throw ValidationError("row length does not match weights");
    if (y < 0 || static_cast<std::size_t>(y) >= w.num_classes()) throw ValidationError("class index out of range");
    double s = w.class_log_prior[static_cast<std::size_t>(y)];
    for (std::size_t j = 0; j < row.size(); ++j) {
        if (row[j] == y) s += w.accuracy[j];
        if (row[j] != kAbstain) s += w.propensity[j];
    }
    return s;
}

Posterior posterior(const LabelingMatrix& matrix, const ModelWeights& w, kernels::Backend backend) {
    check_compatible(matrix, w);
    Posterior post;
    post.num_classes = matrix.num_classes();
    normalized_scores(matrix, w, backend, post.probs);
    return post;
}

double log_partition(const ModelWeights& w, std::size_t n, std::size_t k) {
    if (w.num_classes() != k) throw ValidationError("class prior size does not match k");
    double per_example = log_sum_exp(w.class_log_prior);
    for (std::size_t j = 0; j < w.num_explanations(); ++j) {
        per_example += log_cell_norm(w.accuracy[j], w.propensity[j], k);
    }
    return static_cast<double>(n) * per_example;
}

double marginal_log_likelihood(const LabelingMatrix& matrix, const ModelWeights& w, kernels::Backend backend) {
    check_compatible(matrix, w);
    std::vector<double> probs;
    const auto log_norm = normalized_scores(matrix, w, backend, probs);
    double ll = 0.0;
    for (double v : log_norm) ll += v;
    const auto labeled = label_counts(matrix);
    for (std::size_t j = 0; j < labeled.size(); ++j) ll += w.propensity[j] * labeled[j];
    return ll - log_partition(w, matrix.rows(), matrix.num_classes()) - w.l2_lambda * w.squared_norm();
}

double model_agree_probability(double acc, double prop, std::size_t k) {
    return cell_probs(acc, prop, k).agree;
}

double model_label_probability(double acc, double prop, std::size_t k) {
    const auto pr = cell_probs(acc, prop, k);
    return pr.agree + pr.disagree;
}

double Gradient::norm() const {
    double s = 0.0;
    for (double g : accuracy) s += g * g;
    for (double g : propensity) s += g * g;
    return std::sqrt(s);
}

Gradient gradient(const LabelingMatrix& matrix, const ModelWeights& w, kernels::Backend backend) {
    check_compatible(matrix, w);
    const auto shape = shape_of(matrix);
    std::vector<double> q;
    normalized_scores(matrix, w, backend, q);
    std::vector<double> agree(shape.m);
    kernels::agreement_mass(backend, matrix.cells(), shape, q, agree);
    const auto labeled = label_counts(matrix);
    const double n = static_cast<double>(shape.n);

    Gradient g;
    g.accuracy.resize(shape.m);
    g.propensity.resize(shape.m);
    for (std::size_t j = 0; j < shape.m; ++j) {
        const auto pr = cell_probs(w.accuracy[j], w.propensity[j], shape.k);
        g.accuracy[j] = agree[j] - n * pr.agree - 2.0 * w.l2_lambda * w.accuracy[j];
        g.propensity[j] = labeled[j] - n * (pr.agree + pr.disagree) - 2.0 * w.l2_lambda * w.propensity[j];
    }
    const double prior_lse = log_sum_exp(w.class_log_prior);
    g.class_log_prior.assign(shape.k, 0.0);
    for (std::size_t i = 0; i < shape.n; ++i) {
        for (std::size_t y = 0; y < shape.k; ++y) g.class_log_prior[y] += q[i * shape.k + y];
    }
    for (std::size_t y = 0; y < shape.k; ++y) {
        g.class_log_prior[y] -= n * std::exp(w.class_log_prior[y] - prior_lse);
    }
    return g;
}

TrainingReport fit_em(const LabelingMatrix& matrix, const FitOptions& options) {
    if (matrix.rows() == 0) throw ValidationError("cannot fit on an empty matrix");
    if (!matrix.has_label()) throw ValidationError("all-abstain matrix: nothing to fit");
    if (!(options.l2_lambda >= 0.0)) throw ValidationError("l2_lambda must be >= 0");
    if (!(options.step_size > 0.0)) throw ValidationError("step_size must be > 0");

    const auto shape = shape_of(matrix);
    const double n = static_cast<double>(shape.n);
    const auto labeled = label_counts(matrix);

    TrainingReport report;
    for (std::size_t j = 0; j < shape.m; ++j) {
        if (labeled[j] == 0.0) report.abstain_only_columns.push_back(j);
    }

    ModelWeights w = ModelWeights::zeros(shape.m, shape.k, options.l2_lambda);
    if (!options.class_log_prior.empty()) {
        if (options.class_log_prior.size() != shape.k) throw ValidationError("class prior size does not match k");
        w.class_log_prior = options.class_log_prior;
    }

    std::vector<double> agree(shape.m);
    if (options.init == InitPolicy::majority_vote) {
        const auto q0 = majority_vote_posterior(matrix, options.init_smoothing);
        kernels::agreement_mass(options.backend, matrix.cells(), shape, q0, agree);
        m_step(agree, labeled, n, shape.k, w.l2_lambda, options.step_size, w);
    } else {
        std::fill(w.accuracy.begin(), w.accuracy.end(), 1.0);
        std::fill(w.propensity.begin(), w.propensity.end(), 1.0);
    }

    double ll = marginal_log_likelihood(matrix, w, options.backend);
    if (!std::isfinite(ll)) throw NumericError("non-finite log-likelihood at iteration 0");
    report.log_likelihood_trace.push_back(ll);

    std::vector<double> q;
    for (std::size_t it = 1; it <= options.max_iters; ++it) {
        normalized_scores(matrix, w, options.backend, q);
        kernels::agreement_mass(options.backend, matrix.cells(), shape, q, agree);
        m_step(agree, labeled, n, shape.k, w.l2_lambda, options.step_size, w);

        const double next = marginal_log_likelihood(matrix, w, options.backend);
        if (!std::isfinite(next)) {
            throw NumericError("non-finite log-likelihood at iteration " + std::to_string(it));
        }
        report.log_likelihood_trace.push_back(next);
        report.iterations = it;
        const double change = std::abs(next - ll) / n;
        ll = next;
        if (change < options.tol) {
            report.converged = true;
            break;
        }
    }
    report.final_weights = std::move(w);
    return report;
}

std::vector<Prediction> map_exact(const LabelingMatrix& matrix, const ModelWeights& w, kernels::Backend backend) {
    const auto post = posterior(matrix, w, backend);
    // Argmax on the raw scores so that equal scores are detected as exact ties.
    const auto shape = shape_of(matrix);
    std::vector<double> scores(shape.n * shape.k);
    kernels::class_scores(backend, matrix.cells(), shape, w.accuracy, w.class_log_prior, scores);

    std::vector<Prediction> out(shape.n);
    for (std::size_t i = 0; i < shape.n; ++i) {
        auto& p = out[i];
        p.example_id = matrix.example_ids()[i];
        p.label = static_cast<int>(
            argmax_lowest(std::span<const double>(scores).subspan(i * shape.k, shape.k), &p.tie));
        auto row = post.row(i);
        p.posterior.assign(row.begin(), row.end());
    }
    return out;
}

std::vector<Prediction> gibbs_map(const LabelingMatrix& matrix, const ModelWeights& w, const GibbsOptions& options,
                                  kernels::Backend backend) {
    if (options.samples == 0) throw ValidationError("gibbs sampler needs at least one retained sample");
    const auto post = posterior(matrix, w, backend);
    const auto shape = shape_of(matrix);
    std::vector<std::uint32_t> counts(shape.n * shape.k);
    kernels::gibbs_counts(backend, post.probs, shape, options.burn_in, options.samples, options.seed, counts);

    std::vector<Prediction> out(shape.n);
    std::vector<double> freq(shape.k);
    for (std::size_t i = 0; i < shape.n; ++i) {
        for (std::size_t y = 0; y < shape.k; ++y) {
            freq[y] = static_cast<double>(counts[i * shape.k + y]) / static_cast<double>(options.samples);
        }
        auto& p = out[i];
        p.example_id = matrix.example_ids()[i];
        p.label = static_cast<int>(argmax_lowest(freq, &p.tie));
        p.posterior = freq;
    }
    return out;
}

std::string serialize_weights_json(const ModelWeights& w, std::span<const std::string> explanation_ids,
                                   InitPolicy init, std::uint64_t seed) {
    if (explanation_ids.size() != w.num_explanations()) {
        throw ValidationError("explanation id count does not match weights");
    }
    json doc;
    json expl = json::object();
    for (std::size_t j = 0; j < explanation_ids.size(); ++j) {
        expl[explanation_ids[j]] = {{"acc", w.accuracy[j]}, {"prop", w.propensity[j]}};
    }
    doc["explanations"] = std::move(expl);
    doc["prior"] = w.class_log_prior;
    doc["lambda"] = w.l2_lambda;
    doc["init_policy"] = to_string(init);
    doc["seed"] = seed;
    return doc.dump(2) + "\n";
}

ModelWeights parse_weights_json(std::string_view json_text, std::span<const std::string> explanation_ids) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid weights JSON: ") + e.what());
    }
    try {
        ModelWeights w;
        const auto& expl = doc.at("explanations");
        for (const auto& id : explanation_ids) {
            if (!expl.contains(id)) throw ValidationError("weights JSON has no entry for explanation '" + id + "'");
            w.accuracy.push_back(expl.at(id).at("acc").get<double>());
            w.propensity.push_back(expl.at(id).at("prop").get<double>());
        }
        w.class_log_prior = doc.at("prior").get<std::vector<double>>();
        w.l2_lambda = doc.value("lambda", 1e-4);
        return w;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid weights JSON: ") + e.what());
    }
}

}  // namespace talc
