#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "talc/ablate.hpp"
#include "talc/baselines.hpp"
#include "talc/error.hpp"
#include "talc/io.hpp"
#include "talc/label_model.hpp"
#include "talc/pipeline.hpp"
#include "talc/pseudo_labeler.hpp"
#include "talc/simulate.hpp"

namespace talc::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Run manifests

struct Manifest {
    std::string command;
    std::vector<std::string> input_options;  // option names whose values are input files
    std::vector<fs::path> outputs;
    std::vector<std::string> extra_argv;     // resolved values not given on the command line
    std::uint64_t seed = 0;
};

std::string option_name(const CLI::Option* opt) { return "--" + opt->get_lnames().front(); }

std::string file_hash(const fs::path& p) { return sha256_hex(read_file(p)); }

void write_manifest(const CLI::App& sub, const Manifest& m, const fs::path& path) {
    json argv = json::array();
    argv.push_back(m.command);
    json config = json::object();
    json inputs = json::array();
    for (const CLI::Option* opt : sub.get_options()) {
        if (opt->get_lnames().empty()) continue;
        const std::string name = opt->get_lnames().front();
        if (name == "help" || name == "config") continue;
        const bool is_flag = opt->get_expected_min() == 0;
        if (opt->count() > 0) {
            argv.push_back(option_name(opt));
            if (!is_flag) argv.push_back(opt->results().front());
            config[name] = is_flag ? json(true) : json(opt->results().front());
        } else if (auto it = std::find(m.extra_argv.begin(), m.extra_argv.end(), "--" + name);
                   it != m.extra_argv.end() && it + 1 != m.extra_argv.end()) {
            config[name] = *(it + 1);
        } else {
            config[name] = is_flag ? json(false) : json(opt->get_default_str());
        }
        if (opt->count() > 0 && std::find(m.input_options.begin(), m.input_options.end(), name) != m.input_options.end()) {
            const std::string p = opt->results().front();
            inputs.push_back({{"option", name}, {"path", p}, {"sha256", file_hash(p)}});
        }
    }
    for (const auto& a : m.extra_argv) argv.push_back(a);
    json outputs = json::array();
    for (const auto& p : m.outputs) outputs.push_back({{"path", p.string()}, {"sha256", file_hash(p)}});

    json doc;
    doc["command"] = m.command;
    doc["argv"] = std::move(argv);
    doc["config"] = std::move(config);
    doc["inputs"] = std::move(inputs);
    doc["seed"] = m.seed;
    doc["tool_version"] = kToolVersion;
    doc["outputs"] = std::move(outputs);
    write_file(path, doc.dump(2) + "\n");
}

fs::path manifest_path(const std::string& override_path, const fs::path& out_dir, const std::string& command) {
    return override_path.empty() ? out_dir / (command + "_manifest.json") : fs::path(override_path);
}

// ---------------------------------------------------------------------------
// Shared helpers

std::vector<double> parse_number_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ValidationError("'" + item + "' is not a number");
        }
    }
    return out;
}

// Deterministic default for provenance timestamps so reruns are byte-identical.
std::string default_timestamp() {
    std::time_t t = 0;
    if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) t = static_cast<std::time_t>(std::strtoll(env, nullptr, 10));
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Label space with names "0".."K-1" large enough for every integer token seen.
LabelSpace infer_label_space(const std::string& matrix_text, const GoldLabels* gold) {
    int max_label = 1;
    std::stringstream ss(matrix_text);
    std::string line;
    bool header = true;
    while (std::getline(ss, line)) {
        if (header) {
            header = false;
            continue;
        }
        std::stringstream ls(line);
        std::string field;
        bool first = true;
        while (std::getline(ls, field, ',')) {
            if (first) {
                first = false;
                continue;
            }
            try {
                max_label = std::max(max_label, std::stoi(field));
            } catch (const std::exception&) {
            }
        }
    }
    if (gold) {
        for (int l : gold->labels) max_label = std::max(max_label, l);
    }
    std::vector<std::string> names;
    for (int c = 0; c <= max_label; ++c) names.push_back(std::to_string(c));
    return LabelSpace(names);
}

struct ModelFlags {
    std::string init = "majority_vote";
    double lambda = 1e-4;
    std::size_t max_iters = 500;
    double tol = 1e-6;
    double step_size = 1.0;
    std::string inference = "exact";
    std::size_t burn_in = 100;
    std::size_t samples = 500;
    std::string backend = "openmp";
};

void add_model_flags(CLI::App* sub, ModelFlags& f) {
    sub->add_option("--init", f.init, "EM initialization: majority_vote or constant")->capture_default_str();
    sub->add_option("--lambda", f.lambda, "L2 regularization strength")->capture_default_str();
    sub->add_option("--max-iters", f.max_iters, "Maximum EM iterations")->capture_default_str();
    sub->add_option("--tol", f.tol, "Per-example log-likelihood change for convergence")->capture_default_str();
    sub->add_option("--step-size", f.step_size, "Initial M-step step multiplier")->capture_default_str();
    sub->add_option("--inference", f.inference, "MAP inference: exact or gibbs")->capture_default_str();
    sub->add_option("--burn-in", f.burn_in, "Gibbs burn-in sweeps")->capture_default_str();
    sub->add_option("--samples", f.samples, "Gibbs retained samples")->capture_default_str();
    sub->add_option("--backend", f.backend, "Kernel backend: openmp or serial")->capture_default_str();
}

ModelHyper to_hyper(const ModelFlags& f, std::uint64_t seed) {
    ModelHyper h;
    h.fit.init = init_policy_from_string(f.init);
    h.fit.l2_lambda = f.lambda;
    h.fit.max_iters = f.max_iters;
    h.fit.tol = f.tol;
    h.fit.step_size = f.step_size;
    if (f.backend == "serial") {
        h.fit.backend = kernels::Backend::serial;
    } else if (f.backend != "openmp") {
        throw ValidationError("unknown backend '" + f.backend + "'");
    }
    if (f.inference == "gibbs") {
        h.inference = InferenceMethod::gibbs;
    } else if (f.inference != "exact") {
        throw ValidationError("unknown inference method '" + f.inference + "'");
    }
    h.gibbs = {f.burn_in, f.samples, seed};
    return h;
}

// ---------------------------------------------------------------------------
// Commands

struct AdaptFlags {
    std::string matrix, classes, gold, weights_out, predictions_out, out_dir = ".", manifest, timestamp;
    double alpha = 1.0;
    std::uint64_t seed = 0;
    bool shuffle = false;
    ModelFlags model;
};

int cmd_adapt(const CLI::App& sub, AdaptFlags& f, std::ostream& out) {
    const auto space = parse_label_space_json(read_file(f.classes));
    const auto matrix = parse_labeling_matrix(read_file(f.matrix), space);
    std::optional<GoldLabels> gold;
    if (!f.gold.empty()) gold = parse_gold_labels(read_file(f.gold), &space);

    Manifest manifest{"adapt", {"matrix", "classes", "gold"}, {}, {}, f.seed};
    if (f.timestamp.empty()) {
        f.timestamp = default_timestamp();
        manifest.extra_argv = {"--timestamp", f.timestamp};
    }

    AdaptationConfig config{f.alpha, f.seed, f.shuffle};
    const auto hyper = to_hyper(f.model, f.seed);
    const auto run = talc_adapt(matrix, config, hyper, f.timestamp);

    std::optional<double> acc;
    if (gold) acc = accuracy(run.predictions, *gold);

    const fs::path dir(f.out_dir);
    const fs::path pred_path = f.predictions_out.empty() ? dir / "predictions.csv" : fs::path(f.predictions_out);
    const fs::path weights_path = f.weights_out.empty() ? dir / "weights.json" : fs::path(f.weights_out);
    const fs::path run_path = dir / "run.json";
    write_file(pred_path, serialize_predictions(run.predictions, matrix.num_classes()));
    write_file(weights_path, serialize_weights_json(run.training_report.final_weights, matrix.explanation_ids(),
                                                    hyper.fit.init, f.seed));
    write_file(run_path, serialize_adaptation_run_json(run, matrix, acc));
    manifest.outputs = {pred_path, weights_path, run_path};
    write_manifest(sub, manifest, manifest_path(f.manifest, dir, "adapt"));

    const auto& rep = run.training_report;
    out << "n=" << matrix.rows() << " m=" << matrix.cols() << " k=" << matrix.num_classes()
        << " n_adapt=" << run.provenance.n_adapt << " iterations=" << rep.iterations
        << " converged=" << (rep.converged ? "true" : "false") << "\n";
    if (acc) out << "accuracy=" << format_double(*acc) << "\n";
    return 0;
}

struct SimulateFlags {
    std::size_t n = 0;
    std::size_t k = 2;
    std::string profiles, out_dir = ".", manifest, class_weights;
    std::uint64_t seed = 0;
};

int cmd_simulate(const CLI::App& sub, SimulateFlags& f, std::ostream& out) {
    auto set = parse_profiles_json(read_file(f.profiles));
    if (!f.class_weights.empty()) set.class_weights = parse_number_list(f.class_weights);
    if (!set.class_names.empty() && set.class_names.size() != f.k) {
        throw ValidationError("profile class_names has " + std::to_string(set.class_names.size()) +
                              " entries but --k is " + std::to_string(f.k));
    }
    auto task = generate(f.n, f.k, set.profiles, set.class_weights, f.seed);
    if (!set.class_names.empty()) {
        task.label_space = LabelSpace(set.class_names);
        task.matrix = LabelingMatrix(task.matrix.example_ids(), task.matrix.explanation_ids(),
                                     {task.matrix.cells().begin(), task.matrix.cells().end()}, task.label_space);
    }

    const fs::path dir(f.out_dir);
    const std::vector<fs::path> outputs = {dir / "matrix.csv", dir / "gold.csv", dir / "profiles.json",
                                           dir / "classes.json", dir / "task.json"};
    write_file(outputs[0], serialize_labeling_matrix(task.matrix));
    write_file(outputs[1], serialize_gold_labels(task.gold));
    write_file(outputs[2], serialize_profiles_json(set));
    write_file(outputs[3], serialize_label_space_json(task.label_space));
    write_file(outputs[4], serialize_task_descriptor_json(synthetic_descriptor(task, "synthetic")));
    write_manifest(sub, {"simulate", {"profiles"}, outputs, {}, f.seed}, manifest_path(f.manifest, dir, "simulate"));

    out << "wrote " << task.matrix.rows() << "x" << task.matrix.cols() << " matrix to " << outputs[0].string()
        << "\n";
    return 0;
}

struct AblateFlags {
    std::string matrix, task, gold, mode = "top-percent", rank_by = "accuracy", direction = "best", values,
        out_dir = ".", manifest;
    double x = 0.0;
    double alpha = 1.0;
    std::uint64_t seed = 0;
    ModelFlags model;
};

int cmd_ablate(const CLI::App& sub, AblateFlags& f, std::ostream& out) {
    const auto task = parse_task_descriptor_json(read_file(f.task));
    const auto matrix = parse_labeling_matrix(read_file(f.matrix), task.label_space);
    const auto gold = parse_gold_labels(read_file(f.gold), &task.label_space);

    AblationSpec spec;
    spec.mode = ablation_mode_from_string(f.mode);
    spec.ranking.key = ranking_key_from_string(f.rank_by);
    if (f.direction == "worst") {
        spec.ranking.direction = RankDirection::worst_first;
    } else if (f.direction != "best") {
        throw ValidationError("--direction must be best or worst");
    }
    spec.seed = f.seed;
    if (!f.values.empty()) spec.values = parse_number_list(f.values);
    if (sub.count("--x") > 0) spec.values = {f.x};

    AdaptationConfig config{f.alpha, f.seed, false};
    const auto report = run_ablation(matrix, task, gold, spec, config, to_hyper(f.model, f.seed));

    const fs::path dir(f.out_dir);
    const std::vector<fs::path> outputs = {dir / "ablation_report.json", dir / "ablation.csv"};
    write_file(outputs[0], serialize_ablation_report_json(report));
    write_file(outputs[1], serialize_ablation_csv(report));
    write_manifest(sub, {"ablate", {"matrix", "task", "gold"}, outputs, {}, f.seed},
                   manifest_path(f.manifest, dir, "ablate"));

    out << "unablated accuracy=" << format_double(report.unablated_accuracy)
        << " mv=" << format_double(report.unablated_mv_accuracy) << "\n";
    for (const auto& arm : report.arms) {
        out << "arm " << arm.arm_id << " " << to_string(arm.mode) << " param=" << format_double(arm.parameter)
            << " accuracy=" << format_double(arm.accuracy) << " mv=" << format_double(arm.mv_accuracy)
            << " coverage=" << format_double(arm.coverage) << "\n";
    }
    return 0;
}

struct EvalFlags {
    std::string pred, gold, matrix, classes, out_dir = ".", manifest;
    bool per_explanation = false;
};

int cmd_eval(const CLI::App& sub, EvalFlags& f, std::ostream& out) {
    const auto predictions = parse_predictions(read_file(f.pred));
    std::optional<LabelSpace> space;
    if (!f.classes.empty()) space = parse_label_space_json(read_file(f.classes));
    const auto gold = parse_gold_labels(read_file(f.gold), space ? &*space : nullptr);

    std::size_t overlap = 0;
    for (const auto& id : gold.example_ids) {
        if (std::any_of(predictions.begin(), predictions.end(), [&](const Prediction& p) { return p.example_id == id; })) {
            ++overlap;
        }
    }
    if (overlap == 0) throw ValidationError("prediction and gold ids are disjoint");
    if (overlap != gold.size()) {
        throw ValidationError("id mismatch: " + std::to_string(gold.size() - overlap) + " gold ids have no prediction");
    }
    const double acc = accuracy(predictions, gold);
    const double coverage = static_cast<double>(overlap) / static_cast<double>(predictions.size());

    json report;
    report["accuracy"] = acc;
    report["coverage"] = coverage;
    report["scored"] = overlap;
    out << "accuracy=" << format_double(acc) << " coverage=" << format_double(coverage) << " scored=" << overlap << "\n";

    if (f.per_explanation) {
        if (f.matrix.empty()) throw ValidationError("--per-explanation requires --matrix");
        const std::string text = read_file(f.matrix);
        const auto matrix = parse_labeling_matrix(text, space ? *space : infer_label_space(text, &gold));
        json table = json::array();
        out << std::left << std::setw(24) << "explanation_id" << std::setw(24) << "accuracy"
            << "coverage\n";
        for (std::size_t j = 0; j < matrix.cols(); ++j) {
            const auto r = single_explanation(matrix, j, gold);
            const std::string acc_text = r.accuracy_defined ? format_double(r.accuracy) : "NaN";
            out << std::left << std::setw(24) << (matrix.explanation_ids()[j] + " ") << std::setw(24) << acc_text
                << format_double(r.coverage) << "\n";
            table.push_back({{"explanation_id", matrix.explanation_ids()[j]},
                             {"accuracy", r.accuracy_defined ? json(r.accuracy) : json(nullptr)},
                             {"coverage", r.coverage}});
        }
        report["per_explanation"] = std::move(table);
    }

    const fs::path dir(f.out_dir);
    const fs::path report_path = dir / "eval_report.json";
    write_file(report_path, report.dump(2) + "\n");
    write_manifest(sub, {"eval", {"pred", "gold", "matrix", "classes"}, {report_path}, {}, 0},
                   manifest_path(f.manifest, dir, "eval"));
    return 0;
}

struct BaselineFlags {
    std::string matrix, classes, method = "mv", fallback = "fixed", gold, out_dir = ".", manifest;
    std::uint64_t seed = 0;
};

int cmd_baseline(const CLI::App& sub, BaselineFlags& f, std::ostream& out) {
    const auto space = parse_label_space_json(read_file(f.classes));
    const auto matrix = parse_labeling_matrix(read_file(f.matrix), space);
    BaselineResult result;
    if (f.method == "mv") {
        if (f.fallback != "fixed" && f.fallback != "global") throw ValidationError("--fallback must be fixed or global");
        result = majority_vote(matrix, f.fallback == "global" ? MajorityFallback::global_mode
                                                              : MajorityFallback::fixed_class);
    } else if (f.method == "random") {
        result = random_labels(matrix, f.seed);
    } else {
        throw ValidationError("unknown baseline method '" + f.method + "'");
    }
    const fs::path dir(f.out_dir);
    const fs::path path = dir / ("predictions_" + f.method + ".csv");
    write_file(path, serialize_predictions(result.predictions, matrix.num_classes()));
    write_manifest(sub, {"baseline", {"matrix", "classes", "gold"}, {path}, {}, f.seed},
                   manifest_path(f.manifest, dir, "baseline"));
    out << to_string(result.method) << ": " << result.predictions.size() << " predictions, "
        << result.fallback_rows.size() << " fallback rows\n";
    if (!f.gold.empty()) {
        out << "accuracy=" << format_double(accuracy(result.predictions, parse_gold_labels(read_file(f.gold), &space)))
            << "\n";
    }
    return 0;
}

struct WarmupFlags {
    std::string matrix, classes, out_dir = ".", manifest;
    std::size_t warmup_n = 1;
    std::uint64_t seed = 0;
    ModelFlags model;
};

int cmd_warmup(const CLI::App& sub, WarmupFlags& f, std::ostream& out) {
    const auto space = parse_label_space_json(read_file(f.classes));
    const auto matrix = parse_labeling_matrix(read_file(f.matrix), space);
    const auto result = warmup_adapt(matrix, f.warmup_n, to_hyper(f.model, f.seed));

    std::string csv = "example_id,arrival,source,online_label,tie_flag,retroactive_label\n";
    for (const auto& s : result.stream) {
        csv += s.online.example_id + "," + std::to_string(s.arrival) + "," + to_string(s.source) + "," +
               std::to_string(s.online.label) + "," + (s.online.tie ? "1" : "0") + "," +
               (s.retroactive ? std::to_string(s.retroactive->label) : std::string()) + "\n";
    }
    const fs::path dir(f.out_dir);
    const fs::path path = dir / "warmup.csv";
    write_file(path, csv);
    write_manifest(sub, {"warmup", {"matrix", "classes"}, {path}, {}, f.seed}, manifest_path(f.manifest, dir, "warmup"));
    out << "rows=" << result.stream.size() << " adapted=" << (result.incomplete ? "false" : "true") << "\n";
    if (result.incomplete) out << "warning: stream ended before warm-up completed; all rows use majority vote\n";
    return 0;
}

struct LabelFlags {
    std::string task, tmpl, endpoint, mode = "per-explanation", out_path = "matrix.csv", manifest;
    bool offline = false;
};

int cmd_label(const CLI::App& sub, LabelFlags& f, std::ostream& out, std::ostream& err) {
    const auto task = parse_task_descriptor_json(read_file(f.task));
    const auto tmpl = parse_prompt_template_json(read_file(f.tmpl));
    auto endpoint = parse_endpoint_config_json(read_file(f.endpoint));
    endpoint.offline = f.offline;
    PromptMode mode = PromptMode::per_explanation;
    if (f.mode == "concat") {
        mode = PromptMode::concat;
    } else if (f.mode != "per-explanation") {
        throw ValidationError("--mode must be per-explanation or concat");
    }
    const auto run = build_matrix(task, tmpl, endpoint, mode);

    const fs::path path(f.out_path);
    write_file(path, serialize_labeling_matrix(run.matrix));
    json log = json::array();
    for (const auto& e : run.log) {
        log.push_back({{"example_id", e.example_id}, {"explanation_id", e.explanation_id},
                       {"completion", e.completion}, {"error", e.error}});
        if (!e.error.empty()) {
            err << "request failed for (" << e.example_id << ", " << e.explanation_id << "): " << e.error << "\n";
        }
    }
    const fs::path log_path = path.parent_path() / (path.stem().string() + "_label_log.json");
    write_file(log_path, json{{"complete", run.complete}, {"entries", log}}.dump(2) + "\n");
    write_manifest(sub, {"label", {"task", "template", "endpoint"}, {path, log_path}, {}, 0},
                   manifest_path(f.manifest, path.parent_path(), "label"));
    out << "requests=" << run.requests_sent << " cache_hits=" << run.cache_hits
        << " unmatched_or_failed=" << run.log.size() << " complete=" << (run.complete ? "true" : "false") << "\n";
    return 0;
}

int cmd_replay(const std::string& manifest_file, std::ostream& out, std::ostream& err) {
    json doc;
    try {
        doc = json::parse(read_file(manifest_file));
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid manifest: ") + e.what());
    }
    for (const auto& in : doc.at("inputs")) {
        const std::string p = in.at("path").get<std::string>();
        if (!fs::exists(p) || file_hash(p) != in.at("sha256").get<std::string>()) {
            throw ValidationError("input '" + p + "' differs from the manifest");
        }
    }
    const auto argv = doc.at("argv").get<std::vector<std::string>>();
    const auto expected = doc.at("outputs");
    const int code = run(argv, out, err);
    if (code != 0) return code;
    for (const auto& o : expected) {
        const std::string p = o.at("path").get<std::string>();
        if (!fs::exists(p) || file_hash(p) != o.at("sha256").get<std::string>()) {
            err << "talc: replay mismatch: " << p << "\n";
            return 1;
        }
    }
    out << "replay ok: " << expected.size() << " outputs identical\n";
    return 0;
}

// Replaces `--config FILE` with the file's settings as flags. Settings for
// options already on the command line are dropped so flags win.
std::vector<std::string> with_config_file(const std::vector<std::string>& args) {
    std::vector<std::string> out;
    std::string file;
    for (std::size_t a = 0; a < args.size(); ++a) {
        if (args[a] == "--config") {
            if (a + 1 >= args.size()) throw CLI::ArgumentMismatch("--config requires a file");
            file = args[++a];
        } else if (args[a].rfind("--config=", 0) == 0) {
            file = args[a].substr(9);
        } else {
            out.push_back(args[a]);
        }
    }
    if (file.empty()) return out;
    if (!fs::exists(file)) throw CLI::FileError::Missing(file);
    auto given = [&](const std::string& name) {
        return std::any_of(out.begin(), out.end(), [&](const std::string& a) {
            return a == "--" + name || a.rfind("--" + name + "=", 0) == 0;
        });
    };
    std::vector<std::string> extra;
    for (const auto& item : CLI::ConfigINI().from_file(file)) {
        if (item.name.empty() || item.name == "++" || item.name == "--" || given(item.name)) continue;
        if (item.inputs.size() == 1 && (item.inputs[0] == "true" || item.inputs[0] == "false")) {
            if (item.inputs[0] == "true") extra.push_back("--" + item.name);
            continue;
        }
        extra.push_back("--" + item.name);
        std::string joined;
        for (const auto& v : item.inputs) joined += (joined.empty() ? "" : ",") + v;
        extra.push_back(joined);
    }
    out.insert(out.end(), extra.begin(), extra.end());
    return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Test-time label aggregation over multi-explanation pseudo-labels", "talc"};
    std::string config_path;  // consumed by with_config_file before parsing
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    AdaptFlags adapt;
    auto* adapt_cmd = app.add_subcommand("adapt", "Fit the aggregator on the adaptation split and label every row");
    adapt_cmd->add_option("--config", config_path, "key=value file; flags on the command line take precedence");
    adapt_cmd->add_option("--matrix", adapt.matrix, "Labeling matrix CSV")->required();
    adapt_cmd->add_option("--classes", adapt.classes, "Label space JSON")->required();
    adapt_cmd->add_option("--alpha", adapt.alpha, "Adaptation ratio in [0,1]")->capture_default_str();
    adapt_cmd->add_option("--seed", adapt.seed, "Seed for shuffling and sampling")->capture_default_str();
    adapt_cmd->add_flag("--shuffle", adapt.shuffle, "Shuffle rows (seeded) before the prefix split");
    adapt_cmd->add_option("--gold", adapt.gold, "Gold CSV; adds accuracy to the report");
    adapt_cmd->add_option("--weights-out", adapt.weights_out, "Weights JSON path");
    adapt_cmd->add_option("--predictions-out", adapt.predictions_out, "Predictions CSV path");
    adapt_cmd->add_option("--out-dir", adapt.out_dir, "Output directory")->capture_default_str();
    adapt_cmd->add_option("--manifest", adapt.manifest, "Manifest path");
    adapt_cmd->add_option("--timestamp", adapt.timestamp, "Provenance timestamp (default from SOURCE_DATE_EPOCH or 0)");
    add_model_flags(adapt_cmd, adapt.model);

    SimulateFlags sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic multi-teacher task");
    sim_cmd->add_option("--config", config_path, "key=value file; flags on the command line take precedence");
    sim_cmd->add_option("--n", sim.n, "Number of examples")->required();
    sim_cmd->add_option("--k", sim.k, "Number of classes")->capture_default_str();
    sim_cmd->add_option("--profiles", sim.profiles, "Teacher profile JSON")->required();
    sim_cmd->add_option("--seed", sim.seed, "Generator seed")->capture_default_str();
    sim_cmd->add_option("--class-weights", sim.class_weights, "Comma-separated class probabilities");
    sim_cmd->add_option("--out-dir", sim.out_dir, "Output directory")->capture_default_str();
    sim_cmd->add_option("--manifest", sim.manifest, "Manifest path");

    AblateFlags abl;
    auto* abl_cmd = app.add_subcommand("ablate", "Run a robustness ablation");
    abl_cmd->add_option("--config", config_path, "key=value file; flags on the command line take precedence");
    abl_cmd->add_option("--matrix", abl.matrix, "Labeling matrix CSV")->required();
    abl_cmd->add_option("--task", abl.task, "Task descriptor JSON")->required();
    abl_cmd->add_option("--gold", abl.gold, "Gold CSV")->required();
    abl_cmd->add_option("--mode", abl.mode,
                        "top-percent, drop-best, add-worst, malicious, explanation-ratio or adaptation-sweep")
        ->capture_default_str();
    abl_cmd->add_option("--x", abl.x, "Percentage for top-percent");
    abl_cmd->add_option("--values", abl.values, "Comma-separated arm values (percentages, ratios or alphas)");
    abl_cmd->add_option("--rank-by", abl.rank_by, "accuracy, perplexity or empirical")->capture_default_str();
    abl_cmd->add_option("--direction", abl.direction, "best or worst")->capture_default_str();
    abl_cmd->add_option("--alpha", abl.alpha, "Adaptation ratio for every arm")->capture_default_str();
    abl_cmd->add_option("--seed", abl.seed, "Seed")->capture_default_str();
    abl_cmd->add_option("--out-dir", abl.out_dir, "Output directory")->capture_default_str();
    abl_cmd->add_option("--manifest", abl.manifest, "Manifest path");
    add_model_flags(abl_cmd, abl.model);

    EvalFlags ev;
    auto* eval_cmd = app.add_subcommand("eval", "Score predictions against gold labels");
    eval_cmd->add_option("--config", config_path, "key=value file; flags on the command line take precedence");
    eval_cmd->add_option("--pred", ev.pred, "Predictions CSV")->required();
    eval_cmd->add_option("--gold", ev.gold, "Gold CSV")->required();
    eval_cmd->add_flag("--per-explanation", ev.per_explanation, "Also score each matrix column");
    eval_cmd->add_option("--matrix", ev.matrix, "Labeling matrix CSV for --per-explanation");
    eval_cmd->add_option("--classes", ev.classes, "Label space JSON (optional)");
    eval_cmd->add_option("--out-dir", ev.out_dir, "Output directory")->capture_default_str();
    eval_cmd->add_option("--manifest", ev.manifest, "Manifest path");

    BaselineFlags base;
    auto* base_cmd = app.add_subcommand("baseline", "Label rows without adaptation");
    base_cmd->add_option("--config", config_path, "key=value file; flags on the command line take precedence");
    base_cmd->add_option("--matrix", base.matrix, "Labeling matrix CSV")->required();
    base_cmd->add_option("--classes", base.classes, "Label space JSON")->required();
    base_cmd->add_option("--method", base.method, "mv or random")->capture_default_str();
    base_cmd->add_option("--fallback", base.fallback, "All-abstain rows: fixed or global")->capture_default_str();
    base_cmd->add_option("--gold", base.gold, "Gold CSV; prints accuracy");
    base_cmd->add_option("--seed", base.seed, "Seed for the random baseline")->capture_default_str();
    base_cmd->add_option("--out-dir", base.out_dir, "Output directory")->capture_default_str();
    base_cmd->add_option("--manifest", base.manifest, "Manifest path");

    WarmupFlags warm;
    auto* warm_cmd = app.add_subcommand("warmup", "Label rows as an online stream with a warm-up phase");
    warm_cmd->add_option("--config", config_path, "key=value file; flags on the command line take precedence");
    warm_cmd->add_option("--matrix", warm.matrix, "Labeling matrix CSV (rows in arrival order)")->required();
    warm_cmd->add_option("--classes", warm.classes, "Label space JSON")->required();
    warm_cmd->add_option("--warmup-n", warm.warmup_n, "Rows labeled by majority vote before fitting")
        ->capture_default_str();
    warm_cmd->add_option("--seed", warm.seed, "Seed")->capture_default_str();
    warm_cmd->add_option("--out-dir", warm.out_dir, "Output directory")->capture_default_str();
    warm_cmd->add_option("--manifest", warm.manifest, "Manifest path");
    add_model_flags(warm_cmd, warm.model);

    LabelFlags lab;
    auto* label_cmd = app.add_subcommand("label", "Build a labeling matrix by prompting a completion endpoint");
    label_cmd->add_option("--config", config_path, "key=value file; flags on the command line take precedence");
    label_cmd->add_option("--task", lab.task, "Task descriptor JSON with example records")->required();
    label_cmd->add_option("--template", lab.tmpl, "Prompt template JSON")->required();
    label_cmd->add_option("--endpoint", lab.endpoint, "Endpoint config JSON")->required();
    label_cmd->add_option("--mode", lab.mode, "per-explanation or concat")->capture_default_str();
    label_cmd->add_option("--out", lab.out_path, "Matrix CSV path")->capture_default_str();
    label_cmd->add_flag("--offline", lab.offline, "Serve from cache only");
    label_cmd->add_option("--manifest", lab.manifest, "Manifest path");

    std::string replay_manifest;
    auto* replay_cmd = app.add_subcommand("replay", "Re-run a command from its manifest and verify outputs");
    replay_cmd->add_option("--manifest", replay_manifest, "Manifest JSON")->required();

    try {
        const auto expanded = with_config_file(args);
        std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        const auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front();
        if (e.get_exit_code() == 0) {
            out << (sub ? sub->help() : app.help());
            return 0;
        }
        err << "talc: error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (*adapt_cmd) return cmd_adapt(*adapt_cmd, adapt, out);
        if (*sim_cmd) return cmd_simulate(*sim_cmd, sim, out);
        if (*abl_cmd) return cmd_ablate(*abl_cmd, abl, out);
        if (*eval_cmd) return cmd_eval(*eval_cmd, ev, out);
        if (*base_cmd) return cmd_baseline(*base_cmd, base, out);
        if (*warm_cmd) return cmd_warmup(*warm_cmd, warm, out);
        if (*label_cmd) return cmd_label(*label_cmd, lab, out, err);
        if (*replay_cmd) return cmd_replay(replay_manifest, out, err);
    } catch (const ValidationError& e) {
        err << "talc: error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "talc: error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace talc::cli
