#pragma once

// Text formats: labeling-matrix CSV, gold CSV, prediction CSV and the JSON
// documents for label spaces and task descriptors.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "talc/core.hpp"

namespace talc {

struct Prediction;

/// Parses `example_id,<expl_1>,...` followed by one row per example. Cells
/// are decimal class indices or ABSTAIN. Row order is preserved.
LabelingMatrix parse_labeling_matrix(std::string_view csv_text, const LabelSpace& label_space);
std::string serialize_labeling_matrix(const LabelingMatrix& matrix);

/// `example_id,label` with integer class indices (or class names when a
/// label space is supplied).
GoldLabels parse_gold_labels(std::string_view csv_text, const LabelSpace* label_space = nullptr);
std::string serialize_gold_labels(const GoldLabels& gold);

/// `example_id,label,tie_flag,posterior_0..k-1`
std::string serialize_predictions(const std::vector<Prediction>& predictions, std::size_t num_classes);
std::vector<Prediction> parse_predictions(std::string_view csv_text);

/// Accepts `["a","b"]`, `{"class_names": [...]}` or a full task descriptor.
LabelSpace parse_label_space_json(std::string_view json_text);
std::string serialize_label_space_json(const LabelSpace& space);

TaskDescriptor parse_task_descriptor_json(std::string_view json_text);
std::string serialize_task_descriptor_json(const TaskDescriptor& task);

/// Shortest round-trip decimal form of a double.
std::string format_double(double value);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace talc
