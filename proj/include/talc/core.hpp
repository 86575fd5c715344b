#pragma once

// Domain types shared by every module: the label space, hard and soft
// labeling matrices, task descriptors, gold labels and the adaptation split.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace talc {

/// Cell value meaning "this explanation did not assign a label".
inline constexpr int kAbstain = -1;
/// CSV spelling of kAbstain.
inline constexpr std::string_view kAbstainToken = "ABSTAIN";

class LabelSpace {
public:
    LabelSpace() = default;
    /// Throws ValidationError unless there are >= 2 non-empty distinct names.
    explicit LabelSpace(std::vector<std::string> class_names);

    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& class_names() const { return names_; }
    const std::string& name(int cls) const { return names_.at(static_cast<std::size_t>(cls)); }
    bool valid_class(int cls) const { return cls >= 0 && static_cast<std::size_t>(cls) < names_.size(); }
    bool valid_cell(int cell) const { return cell == kAbstain || valid_class(cell); }
    /// Index of a class name, or nullopt.
    std::optional<int> index_of(std::string_view name) const;

    friend bool operator==(const LabelSpace&, const LabelSpace&) = default;

private:
    std::vector<std::string> names_;
};

/// n x m pseudo-label grid. Cells are class indices or kAbstain, row-major.
class LabelingMatrix {
public:
    LabelingMatrix() = default;
    LabelingMatrix(std::vector<std::string> example_ids, std::vector<std::string> explanation_ids,
                   std::vector<int> cells, LabelSpace label_space);

    std::size_t rows() const { return example_ids_.size(); }
    std::size_t cols() const { return explanation_ids_.size(); }
    std::size_t num_classes() const { return label_space_.size(); }

    int at(std::size_t i, std::size_t j) const { return cells_[i * cols() + j]; }
    std::span<const int> row(std::size_t i) const {
        return std::span<const int>(cells_).subspan(i * cols(), cols());
    }
    std::span<const int> cells() const { return cells_; }

    const std::vector<std::string>& example_ids() const { return example_ids_; }
    const std::vector<std::string>& explanation_ids() const { return explanation_ids_; }
    const LabelSpace& label_space() const { return label_space_; }

    /// Sub-matrix with the given rows, in the given order.
    LabelingMatrix select_rows(std::span<const std::size_t> rows) const;
    /// Sub-matrix with the given columns, in the given order.
    LabelingMatrix select_cols(std::span<const std::size_t> cols) const;
    /// Copy with column j replaced.
    LabelingMatrix with_column(std::size_t j, std::span<const int> values) const;
    /// Copy with rows of other appended (ids must stay unique, columns must match).
    LabelingMatrix stacked(const LabelingMatrix& other) const;

    bool has_label() const;
    std::optional<std::size_t> explanation_index(std::string_view id) const;

    friend bool operator==(const LabelingMatrix&, const LabelingMatrix&) = default;

private:
    std::vector<std::string> example_ids_;
    std::vector<std::string> explanation_ids_;
    std::vector<int> cells_;
    LabelSpace label_space_;
};

/// n x m grid of class-probability vectors (n*m*k doubles, row-major).
class SoftLabelingMatrix {
public:
    SoftLabelingMatrix(std::vector<std::string> example_ids, std::vector<std::string> explanation_ids,
                       std::vector<double> probs, LabelSpace label_space);

    std::size_t rows() const { return example_ids_.size(); }
    std::size_t cols() const { return explanation_ids_.size(); }
    std::size_t num_classes() const { return label_space_.size(); }

    std::span<const double> cell(std::size_t i, std::size_t j) const {
        const std::size_t k = num_classes();
        return std::span<const double>(probs_).subspan((i * cols() + j) * k, k);
    }

    const std::vector<std::string>& example_ids() const { return example_ids_; }
    const std::vector<std::string>& explanation_ids() const { return explanation_ids_; }
    const LabelSpace& label_space() const { return label_space_; }

private:
    std::vector<std::string> example_ids_;
    std::vector<std::string> explanation_ids_;
    std::vector<double> probs_;
    LabelSpace label_space_;
};

struct ExplanationRecord {
    std::string id;
    std::string text;
    std::optional<double> accuracy_metadata;
    std::optional<double> perplexity_metadata;
};

struct ExampleRecord {
    std::string id;
    std::string serialized_features;
};

struct TaskDescriptor {
    std::string task_name;
    LabelSpace label_space;
    std::vector<ExplanationRecord> explanations;
    std::vector<ExampleRecord> example_records;

    /// Throws ValidationError on duplicate ids or out-of-range metadata.
    void validate() const;
    const ExplanationRecord* find_explanation(std::string_view id) const;
};

struct AdaptationConfig {
    double alpha = 1.0;
    std::uint64_t seed = 0;
    bool shuffle_before_split = false;
};

struct GoldLabels {
    std::vector<std::string> example_ids;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    /// Gold label of an id, or nullopt.
    std::optional<int> find(std::string_view id) const;
};

/// floor(alpha * n), with a 1e-9 guard against representation error.
std::size_t adaptation_size(double alpha, std::size_t n);

struct Split {
    LabelingMatrix adaptation;
    LabelingMatrix held_out;
    /// Original row index of every adaptation row, then every held-out row.
    std::vector<std::size_t> adaptation_rows;
    std::vector<std::size_t> held_out_rows;
};

/// Prefix split of the (optionally seeded-shuffled) rows. Throws
/// ValidationError when floor(alpha*n) == 0 or alpha is outside [0, 1].
Split split_by_alpha(const LabelingMatrix& matrix, const AdaptationConfig& config);

/// Argmax of each probability vector when its max is >= tau, else abstain.
LabelingMatrix harden(const SoftLabelingMatrix& soft, double tau);

/// Index of the largest element; ties go to the lowest index.
std::size_t argmax_lowest(std::span<const double> values, bool* tie = nullptr);

}  // namespace talc
