#include "talc/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "talc/error.hpp"
#include "talc/rng.hpp"

namespace talc {

namespace {

void require_unique(const std::vector<std::string>& ids, const char* what) {
    std::unordered_set<std::string_view> seen;
    for (const auto& id : ids) {
        if (!seen.insert(id).second) throw ValidationError(std::string("duplicate ") + what + " id '" + id + "'");
    }
}

}  // namespace

LabelSpace::LabelSpace(std::vector<std::string> class_names) : names_(std::move(class_names)) {
    if (names_.size() < 2) throw ValidationError("label space needs at least 2 classes");
    for (const auto& n : names_) {
        if (n.empty()) throw ValidationError("class names must be non-empty");
        if (n == kAbstainToken) throw ValidationError("class name collides with the abstain token");
    }
    require_unique(names_, "class");
}

std::optional<int> LabelSpace::index_of(std::string_view name) const {
    for (std::size_t c = 0; c < names_.size(); ++c) {
        if (names_[c] == name) return static_cast<int>(c);
    }
    return std::nullopt;
}

LabelingMatrix::LabelingMatrix(std::vector<std::string> example_ids, std::vector<std::string> explanation_ids,
                               std::vector<int> cells, LabelSpace label_space)
    : example_ids_(std::move(example_ids)),
      explanation_ids_(std::move(explanation_ids)),
      cells_(std::move(cells)),
      label_space_(std::move(label_space)) {
    if (label_space_.size() < 2) throw ValidationError("labeling matrix needs a label space with >= 2 classes");
    if (example_ids_.empty() || explanation_ids_.empty()) throw ValidationError("empty matrix");
    if (cells_.size() != example_ids_.size() * explanation_ids_.size()) {
        throw ValidationError("cell count does not match n x m");
    }
    require_unique(example_ids_, "example");
    require_unique(explanation_ids_, "explanation");
    for (int c : cells_) {
        if (!label_space_.valid_cell(c)) throw ValidationError("class index out of range: " + std::to_string(c));
    }
}

LabelingMatrix LabelingMatrix::select_rows(std::span<const std::size_t> rows) const {
    std::vector<std::string> ids;
    std::vector<int> cells;
    ids.reserve(rows.size());
    cells.reserve(rows.size() * cols());
    for (std::size_t r : rows) {
        if (r >= this->rows()) throw ValidationError("row index out of range");
        ids.push_back(example_ids_[r]);
        auto src = row(r);
        cells.insert(cells.end(), src.begin(), src.end());
    }
    return LabelingMatrix(std::move(ids), explanation_ids_, std::move(cells), label_space_);
}

LabelingMatrix LabelingMatrix::select_cols(std::span<const std::size_t> cols) const {
    std::vector<std::string> ids;
    ids.reserve(cols.size());
    for (std::size_t c : cols) {
        if (c >= this->cols()) throw ValidationError("column index out of range");
        ids.push_back(explanation_ids_[c]);
    }
    std::vector<int> cells;
    cells.reserve(rows() * cols.size());
    for (std::size_t i = 0; i < rows(); ++i) {
        for (std::size_t c : cols) cells.push_back(at(i, c));
    }
    return LabelingMatrix(example_ids_, std::move(ids), std::move(cells), label_space_);
}

LabelingMatrix LabelingMatrix::with_column(std::size_t j, std::span<const int> values) const {
    if (j >= cols()) throw ValidationError("column index out of range");
    if (values.size() != rows()) throw ValidationError("column length does not match row count");
    std::vector<int> cells = cells_;
    for (std::size_t i = 0; i < rows(); ++i) cells[i * cols() + j] = values[i];
    return LabelingMatrix(example_ids_, explanation_ids_, std::move(cells), label_space_);
}

LabelingMatrix LabelingMatrix::stacked(const LabelingMatrix& other) const {
    if (other.explanation_ids_ != explanation_ids_ || !(other.label_space_ == label_space_)) {
        throw ValidationError("cannot stack matrices with different columns or label spaces");
    }
    auto ids = example_ids_;
    ids.insert(ids.end(), other.example_ids_.begin(), other.example_ids_.end());
    auto cells = cells_;
    cells.insert(cells.end(), other.cells_.begin(), other.cells_.end());
    return LabelingMatrix(std::move(ids), explanation_ids_, std::move(cells), label_space_);
}

bool LabelingMatrix::has_label() const {
    return std::any_of(cells_.begin(), cells_.end(), [](int c) { return c != kAbstain; });
}

std::optional<std::size_t> LabelingMatrix::explanation_index(std::string_view id) const {
    for (std::size_t j = 0; j < explanation_ids_.size(); ++j) {
        if (explanation_ids_[j] == id) return j;
    }
    return std::nullopt;
}

SoftLabelingMatrix::SoftLabelingMatrix(std::vector<std::string> example_ids, std::vector<std::string> explanation_ids,
                                       std::vector<double> probs, LabelSpace label_space)
    : example_ids_(std::move(example_ids)),
      explanation_ids_(std::move(explanation_ids)),
      probs_(std::move(probs)),
      label_space_(std::move(label_space)) {
    if (label_space_.size() < 2) throw ValidationError("soft matrix needs a label space with >= 2 classes");
    if (example_ids_.empty() || explanation_ids_.empty()) throw ValidationError("empty matrix");
    const std::size_t k = label_space_.size();
    if (probs_.size() != example_ids_.size() * explanation_ids_.size() * k) {
        throw ValidationError("probability count does not match n x m x k");
    }
    require_unique(example_ids_, "example");
    require_unique(explanation_ids_, "explanation");
    for (std::size_t off = 0; off < probs_.size(); off += k) {
        double sum = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            const double p = probs_[off + c];
            if (!(p >= 0.0) || !std::isfinite(p)) throw ValidationError("probabilities must be finite and >= 0");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("probability vector does not sum to 1");
    }
}

void TaskDescriptor::validate() const {
    std::unordered_set<std::string_view> seen;
    for (const auto& e : explanations) {
        if (e.id.empty()) throw ValidationError("explanation id must be non-empty");
        if (!seen.insert(e.id).second) throw ValidationError("duplicate explanation id '" + e.id + "'");
        if (e.accuracy_metadata) {
            const double a = *e.accuracy_metadata;
            if (!std::isfinite(a) || a < 0.0 || a > 1.0) {
                throw ValidationError("accuracy metadata of '" + e.id + "' must lie in [0,1]");
            }
        }
        if (e.perplexity_metadata) {
            const double p = *e.perplexity_metadata;
            if (!std::isfinite(p) || p <= 0.0) {
                throw ValidationError("perplexity metadata of '" + e.id + "' must be finite and > 0");
            }
        }
    }
    std::unordered_set<std::string_view> ex_seen;
    for (const auto& r : example_records) {
        if (!ex_seen.insert(r.id).second) throw ValidationError("duplicate example id '" + r.id + "'");
    }
}

const ExplanationRecord* TaskDescriptor::find_explanation(std::string_view id) const {
    for (const auto& e : explanations) {
        if (e.id == id) return &e;
    }
    return nullptr;
}

std::optional<int> GoldLabels::find(std::string_view id) const {
    for (std::size_t i = 0; i < example_ids.size(); ++i) {
        if (example_ids[i] == id) return labels[i];
    }
    return std::nullopt;
}

std::size_t adaptation_size(double alpha, std::size_t n) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in [0,1]");
    const auto count = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n) + 1e-9));
    return std::min(count, n);
}

Split split_by_alpha(const LabelingMatrix& matrix, const AdaptationConfig& config) {
    const std::size_t n = matrix.rows();
    const std::size_t n_adapt = adaptation_size(config.alpha, n);
    if (n_adapt == 0) throw ValidationError("empty adaptation set (floor(alpha*n) = 0)");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (config.shuffle_before_split) {
        Rng rng(config.seed);
        for (std::size_t i = n; i > 1; --i) {
            std::swap(order[i - 1], order[rng.below(i)]);
        }
    }

    Split split;
    split.adaptation_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_adapt));
    split.held_out_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_adapt), order.end());
    split.adaptation = matrix.select_rows(split.adaptation_rows);
    if (!split.held_out_rows.empty()) split.held_out = matrix.select_rows(split.held_out_rows);
    return split;
}

std::size_t argmax_lowest(std::span<const double> values, bool* tie) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < values.size(); ++c) {
        if (values[c] > values[best]) best = c;
    }
    if (tie != nullptr) {
        *tie = false;
        for (std::size_t c = 0; c < values.size(); ++c) {
            if (c != best && values[c] == values[best]) *tie = true;
        }
    }
    return best;
}

LabelingMatrix harden(const SoftLabelingMatrix& soft, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw ValidationError("tau must lie in [0,1]");
    std::vector<int> cells;
    cells.reserve(soft.rows() * soft.cols());
    for (std::size_t i = 0; i < soft.rows(); ++i) {
        for (std::size_t j = 0; j < soft.cols(); ++j) {
            auto p = soft.cell(i, j);
            const std::size_t best = argmax_lowest(p);
            cells.push_back(p[best] >= tau ? static_cast<int>(best) : kAbstain);
        }
    }
    return LabelingMatrix(soft.example_ids(), soft.explanation_ids(), std::move(cells), soft.label_space());
}

}  // namespace talc
