#include "brute_force.hpp"

#include <cmath>
#include <stdexcept>

namespace talc::testing {

namespace {

// Joint log-weight w^T phi(M, Y) summed over examples, straight from the
// feature definitions.
long double joint_score(const std::vector<int>& cells, const std::vector<int>& labels, std::size_t m,
                        const ModelWeights& w) {
    long double s = 0.0L;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        s += w.class_log_prior[static_cast<std::size_t>(labels[i])];
        for (std::size_t j = 0; j < m; ++j) {
            const int c = cells[i * m + j];
            if (c == labels[i]) s += w.accuracy[j];
            if (c != kAbstain) s += w.propensity[j];
        }
    }
    return s;
}

// Odometer over digits in [lo, lo + base).
bool advance(std::vector<int>& digits, int lo, int base) {
    for (auto& d : digits) {
        if (++d < lo + base) return true;
        d = lo;
    }
    return false;
}

}  // namespace

OracleResult brute_force_oracle(const LabelingMatrix& matrix, const ModelWeights& w) {
    const std::size_t n = matrix.rows();
    const std::size_t m = matrix.cols();
    const std::size_t k = matrix.num_classes();
    const double configs = std::pow(double(k + 1), double(n * m)) * std::pow(double(k), double(n));
    if (configs > kOracleMaxConfigurations) throw std::invalid_argument("instance too large for enumeration");

    const std::vector<int> observed(matrix.cells().begin(), matrix.cells().end());
    const int ki = static_cast<int>(k);
    OracleResult r;

    // Posterior: enumerate y for each example, full score including propensity.
    r.posterior.assign(n * k, 0.0);
    r.map_tie.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<long double> e(k);
        long double total = 0.0L;
        long double best = -INFINITY;
        int ties = 0;
        for (std::size_t y = 0; y < k; ++y) {
            long double s = w.class_log_prior[y];
            for (std::size_t j = 0; j < m; ++j) {
                const int c = observed[i * m + j];
                if (c == static_cast<int>(y)) s += w.accuracy[j];
                if (c != kAbstain) s += w.propensity[j];
            }
            if (s > best) {
                best = s;
                ties = 1;
            } else if (s == best) {
                ++ties;
            }
            e[y] = std::exp(s);
            total += e[y];
        }
        for (std::size_t y = 0; y < k; ++y) r.posterior[i * k + y] = static_cast<double>(e[y] / total);
        r.map_tie[i] = ties > 1;
    }

    // Numerator and MAP: enumerate label vectors Y in lexicographic order.
    std::vector<int> labels(n, 0);
    long double numerator = 0.0L;
    long double best = -INFINITY;
    do {
        const long double s = joint_score(observed, labels, m, w);
        numerator += std::exp(s);
        if (s > best) {
            best = s;
            r.map = labels;
        }
    } while (advance(labels, 0, ki));

    // Normalizer: enumerate every (M', Y). The propensity part depends on M'
    // only, so it is summed once per M'.
    long double z = 0.0L;
    std::vector<int> cells(n * m, kAbstain);
    do {
        double propensity = 0.0;
        for (std::size_t c = 0; c < n * m; ++c) {
            if (cells[c] != kAbstain) propensity += w.propensity[c % m];
        }
        std::fill(labels.begin(), labels.end(), 0);
        do {
            double s = propensity;
            for (std::size_t i = 0; i < n; ++i) {
                s += w.class_log_prior[static_cast<std::size_t>(labels[i])];
                for (std::size_t j = 0; j < m; ++j) {
                    if (cells[i * m + j] == labels[i]) s += w.accuracy[j];
                }
            }
            z += std::exp(s);
        } while (advance(labels, 0, ki));
    } while (advance(cells, kAbstain, ki + 1));

    long double norm = 0.0L;
    for (std::size_t j = 0; j < m; ++j) {
        norm += static_cast<long double>(w.accuracy[j]) * w.accuracy[j] +
                static_cast<long double>(w.propensity[j]) * w.propensity[j];
    }
    r.log_partition = static_cast<double>(std::log(z));
    r.marginal_ll = static_cast<double>(std::log(numerator) - std::log(z) - w.l2_lambda * norm);
    return r;
}

}  // namespace talc::testing
