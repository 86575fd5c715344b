#include "talc/io.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "talc/error.hpp"
#include "talc/label_model.hpp"

namespace talc {

namespace {

using json = nlohmann::ordered_json;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    return s;
}

// Non-empty lines of the text. Quoting is not supported: ids may not contain commas.
std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = trim(text.substr(start, end - start));
        if (!line.empty()) lines.push_back(line);
        start = end + 1;
    }
    return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(trim(line.substr(start)));
            break;
        }
        fields.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return fields;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && ptr == end;
}

std::string line_ref(std::size_t line_no) { return "line " + std::to_string(line_no) + ": "; }

json parse_json(std::string_view text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid ") + what + " JSON: " + e.what());
    }
}

}  // namespace

LabelingMatrix parse_labeling_matrix(std::string_view csv_text, const LabelSpace& label_space) {
    const auto lines = split_lines(csv_text);
    if (lines.empty()) throw ValidationError("empty matrix");
    const auto header = split_fields(lines[0]);
    if (header.empty() || header[0] != "example_id") {
        throw ValidationError("matrix header must start with 'example_id'");
    }
    if (header.size() < 2) throw ValidationError("empty matrix: no explanation columns");
    std::vector<std::string> explanation_ids(header.begin() + 1, header.end());
    for (const auto& id : explanation_ids) {
        if (id.empty()) throw ValidationError("empty explanation id in header");
    }
    if (lines.size() < 2) throw ValidationError("empty matrix: no example rows");

    const std::size_t m = explanation_ids.size();
    std::vector<std::string> example_ids;
    std::vector<int> cells;
    cells.reserve((lines.size() - 1) * m);
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto fields = split_fields(lines[r]);
        if (fields.size() != m + 1) {
            throw ValidationError(line_ref(r + 1) + "ragged row: expected " + std::to_string(m + 1) + " fields, got " +
                                  std::to_string(fields.size()));
        }
        if (fields[0].empty()) throw ValidationError(line_ref(r + 1) + "empty example id");
        example_ids.emplace_back(fields[0]);
        for (std::size_t j = 1; j <= m; ++j) {
            const auto tok = fields[j];
            if (tok == kAbstainToken) {
                cells.push_back(kAbstain);
                continue;
            }
            int value = 0;
            if (!parse_number(tok, value)) {
                throw ValidationError(line_ref(r + 1) + "cell '" + std::string(tok) + "' is not a class index");
            }
            if (!label_space.valid_class(value)) {
                throw ValidationError(line_ref(r + 1) + "class index out of range: " + std::string(tok));
            }
            cells.push_back(value);
        }
    }
    return LabelingMatrix(std::move(example_ids), std::move(explanation_ids), std::move(cells), label_space);
}

std::string serialize_labeling_matrix(const LabelingMatrix& matrix) {
    std::string out = "example_id";
    for (const auto& id : matrix.explanation_ids()) out += "," + id;
    out += "\n";
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        out += matrix.example_ids()[i];
        for (int c : matrix.row(i)) {
            out += ",";
            out += c == kAbstain ? std::string(kAbstainToken) : std::to_string(c);
        }
        out += "\n";
    }
    return out;
}

GoldLabels parse_gold_labels(std::string_view csv_text, const LabelSpace* label_space) {
    const auto lines = split_lines(csv_text);
    if (lines.empty()) throw ValidationError("empty gold file");
    const auto header = split_fields(lines[0]);
    if (header.size() != 2 || header[0] != "example_id" || header[1] != "label") {
        throw ValidationError("gold header must be 'example_id,label'");
    }
    GoldLabels gold;
    std::set<std::string_view> seen;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto fields = split_fields(lines[r]);
        if (fields.size() != 2) throw ValidationError(line_ref(r + 1) + "expected 2 fields");
        int label = 0;
        if (!parse_number(fields[1], label)) {
            std::optional<int> named = label_space ? label_space->index_of(fields[1]) : std::nullopt;
            if (!named) throw ValidationError(line_ref(r + 1) + "unknown label '" + std::string(fields[1]) + "'");
            label = *named;
        }
        if (label < 0 || (label_space && !label_space->valid_class(label))) {
            throw ValidationError(line_ref(r + 1) + "class index out of range: " + std::string(fields[1]));
        }
        if (!seen.insert(fields[0]).second) {
            throw ValidationError(line_ref(r + 1) + "duplicate example id '" + std::string(fields[0]) + "'");
        }
        gold.example_ids.emplace_back(fields[0]);
        gold.labels.push_back(label);
    }
    return gold;
}

std::string serialize_gold_labels(const GoldLabels& gold) {
    std::string out = "example_id,label\n";
    for (std::size_t i = 0; i < gold.size(); ++i) {
        out += gold.example_ids[i] + "," + std::to_string(gold.labels[i]) + "\n";
    }
    return out;
}

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

std::string serialize_predictions(const std::vector<Prediction>& predictions, std::size_t num_classes) {
    std::string out = "example_id,label,tie_flag";
    for (std::size_t c = 0; c < num_classes; ++c) out += ",posterior_" + std::to_string(c);
    out += "\n";
    for (const auto& p : predictions) {
        out += p.example_id + "," + std::to_string(p.label) + "," + (p.tie ? "1" : "0");
        for (std::size_t c = 0; c < num_classes; ++c) {
            out += ",";
            out += c < p.posterior.size() ? format_double(p.posterior[c]) : std::string("0");
        }
        out += "\n";
    }
    return out;
}

std::vector<Prediction> parse_predictions(std::string_view csv_text) {
    const auto lines = split_lines(csv_text);
    if (lines.empty()) throw ValidationError("empty prediction file");
    const auto header = split_fields(lines[0]);
    if (header.size() < 2 || header[0] != "example_id" || header[1] != "label") {
        throw ValidationError("prediction header must start with 'example_id,label'");
    }
    const bool has_tie = header.size() >= 3 && header[2] == "tie_flag";
    const std::size_t first_post = has_tie ? 3 : 2;
    std::vector<Prediction> out;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto fields = split_fields(lines[r]);
        if (fields.size() != header.size()) throw ValidationError(line_ref(r + 1) + "ragged row");
        Prediction p;
        p.example_id = std::string(fields[0]);
        if (!parse_number(fields[1], p.label)) throw ValidationError(line_ref(r + 1) + "label is not an integer");
        if (has_tie) p.tie = fields[2] == "1";
        for (std::size_t c = first_post; c < fields.size(); ++c) {
            double v = 0.0;
            if (!parse_number(fields[c], v)) throw ValidationError(line_ref(r + 1) + "posterior is not a number");
            p.posterior.push_back(v);
        }
        out.push_back(std::move(p));
    }
    return out;
}

LabelSpace parse_label_space_json(std::string_view json_text) {
    const auto doc = parse_json(json_text, "label space");
    try {
        if (doc.is_array()) return LabelSpace(doc.get<std::vector<std::string>>());
        if (doc.contains("class_names")) return LabelSpace(doc.at("class_names").get<std::vector<std::string>>());
        if (doc.contains("label_space")) {
            return LabelSpace(doc.at("label_space").at("class_names").get<std::vector<std::string>>());
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid label space JSON: ") + e.what());
    }
    throw ValidationError("label space JSON needs an array, 'class_names' or 'label_space'");
}

std::string serialize_label_space_json(const LabelSpace& space) {
    json doc;
    doc["class_names"] = space.class_names();
    return doc.dump(2) + "\n";
}

TaskDescriptor parse_task_descriptor_json(std::string_view json_text) {
    const auto doc = parse_json(json_text, "task descriptor");
    TaskDescriptor task;
    try {
        task.task_name = doc.value("task_name", "");
        task.label_space = parse_label_space_json(doc.at("label_space").dump());
        if (doc.contains("explanations")) {
            for (const auto& e : doc.at("explanations")) {
                ExplanationRecord rec;
                rec.id = e.at("id").get<std::string>();
                rec.text = e.value("text", "");
                if (e.contains("accuracy_metadata") && !e["accuracy_metadata"].is_null()) {
                    rec.accuracy_metadata = e["accuracy_metadata"].get<double>();
                }
                if (e.contains("perplexity_metadata") && !e["perplexity_metadata"].is_null()) {
                    rec.perplexity_metadata = e["perplexity_metadata"].get<double>();
                }
                task.explanations.push_back(std::move(rec));
            }
        }
        if (doc.contains("example_records")) {
            for (const auto& r : doc.at("example_records")) {
                ExampleRecord rec;
                rec.id = r.at("id").get<std::string>();
                if (r.contains("serialized_features")) {
                    rec.serialized_features = r.at("serialized_features").get<std::string>();
                } else if (r.contains("features")) {
                    // "<name> equal to <value>. " for each feature, in file order.
                    std::string s;
                    for (const auto& [name, value] : r.at("features").items()) {
                        if (!s.empty()) s += " ";
                        s += name + " equal to " + (value.is_string() ? value.get<std::string>() : value.dump()) + ".";
                    }
                    rec.serialized_features = std::move(s);
                }
                task.example_records.push_back(std::move(rec));
            }
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid task descriptor JSON: ") + e.what());
    }
    task.validate();
    return task;
}

std::string serialize_task_descriptor_json(const TaskDescriptor& task) {
    json doc;
    doc["task_name"] = task.task_name;
    doc["label_space"] = {{"class_names", task.label_space.class_names()}};
    json expl = json::array();
    for (const auto& e : task.explanations) {
        json item = {{"id", e.id}, {"text", e.text}};
        item["accuracy_metadata"] = e.accuracy_metadata ? json(*e.accuracy_metadata) : json(nullptr);
        item["perplexity_metadata"] = e.perplexity_metadata ? json(*e.perplexity_metadata) : json(nullptr);
        expl.push_back(std::move(item));
    }
    doc["explanations"] = std::move(expl);
    json records = json::array();
    for (const auto& r : task.example_records) {
        records.push_back({{"id", r.id}, {"serialized_features", r.serialized_features}});
    }
    doc["example_records"] = std::move(records);
    return doc.dump(2) + "\n";
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

}  // namespace talc
