#include "talc/pseudo_labeler.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "talc/io.hpp"
#include "talc/pipeline.hpp"

namespace talc {

namespace {

using json = nlohmann::ordered_json;

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

// First whole-word occurrence of token in text, or npos.
std::size_t find_word(std::string_view text, std::string_view token) {
    std::size_t pos = text.find(token);
    while (pos != std::string_view::npos) {
        const bool left = pos == 0 || !is_word_char(text[pos - 1]);
        const std::size_t end = pos + token.size();
        const bool right = end >= text.size() || !is_word_char(text[end]);
        if (left && right) return pos;
        pos = text.find(token, pos + 1);
    }
    return std::string_view::npos;
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
}

json parse_json(std::string_view text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid ") + what + " JSON: " + e.what());
    }
}

struct UrlParts {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

UrlParts split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ValidationError("endpoint base_url needs a scheme: '" + url + "'");
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

struct Job {
    std::size_t row;
    std::size_t col;
    std::string prompt;
};

}  // namespace

void PromptTemplate::validate(const LabelSpace& space) const {
    if (template_text.empty()) throw ValidationError("prompt template text is empty");
    std::vector<bool> covered(space.size(), false);
    std::set<std::string> seen;
    for (const auto& [token, cls] : verbalizer) {
        if (!space.valid_class(cls)) throw ValidationError("verbalizer token '" + token + "' maps to an invalid class");
        if (!seen.insert(lower(token)).second) throw ValidationError("verbalizer token '" + token + "' is repeated");
        covered[static_cast<std::size_t>(cls)] = true;
    }
    for (const auto& token : abstain_tokens) {
        if (!seen.insert(lower(token)).second) {
            throw ValidationError("abstain token '" + token + "' overlaps another token");
        }
    }
    for (std::size_t c = 0; c < covered.size(); ++c) {
        if (!covered[c]) throw ValidationError("class '" + space.class_names()[c] + "' has no verbalizer token");
    }
}

PromptTemplate parse_prompt_template_json(std::string_view json_text) {
    const auto doc = parse_json(json_text, "prompt template");
    PromptTemplate t;
    try {
        t.template_text = doc.at("template_text").get<std::string>();
        t.question = doc.value("question", "");
        for (const auto& [token, cls] : doc.at("verbalizer").items()) t.verbalizer[token] = cls.get<int>();
        if (doc.contains("abstain_tokens")) t.abstain_tokens = doc["abstain_tokens"].get<std::vector<std::string>>();
        t.explanation_separator = doc.value("explanation_separator", t.explanation_separator);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid prompt template JSON: ") + e.what());
    }
    return t;
}

void EndpointConfig::validate() const {
    if (base_url.empty()) throw ValidationError("endpoint base_url is empty");
    if (request_timeout_ms <= 0) throw ValidationError("request_timeout_ms must be > 0");
    if (max_retries < 0) throw ValidationError("max_retries must be >= 0");
    if (max_in_flight == 0) throw ValidationError("max_in_flight must be >= 1");
}

EndpointConfig parse_endpoint_config_json(std::string_view json_text) {
    const auto doc = parse_json(json_text, "endpoint");
    EndpointConfig c;
    try {
        c.base_url = doc.at("base_url").get<std::string>();
        c.auth_token_env_var_name = doc.value("auth_token_env_var_name", "");
        c.request_timeout_ms = doc.value("request_timeout_ms", c.request_timeout_ms);
        c.max_retries = doc.value("max_retries", c.max_retries);
        c.cache_dir = doc.value("cache_dir", c.cache_dir.string());
        c.max_tokens = doc.value("max_tokens", c.max_tokens);
        c.max_in_flight = doc.value("max_in_flight", c.max_in_flight);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid endpoint JSON: ") + e.what());
    }
    c.validate();
    return c;
}

std::string render_prompt(const PromptTemplate& tmpl, std::string_view explanations, std::string_view feature_lines) {
    std::string out = tmpl.template_text;
    replace_all(out, "{explanations}", explanations);
    replace_all(out, "{feature_lines}", feature_lines);
    replace_all(out, "{question}", tmpl.question);
    return out;
}

int verbalize(const PromptTemplate& tmpl, std::string_view completion) {
    const std::string text = lower(completion);
    std::size_t best_pos = std::string_view::npos;
    std::size_t best_len = 0;
    int best = kAbstain;
    auto consider = [&](const std::string& token, int cls) {
        const std::string tok = lower(token);
        if (tok.empty()) return;
        const std::size_t pos = find_word(text, tok);
        if (pos == std::string_view::npos) return;
        if (pos < best_pos || (pos == best_pos && tok.size() > best_len)) {
            best_pos = pos;
            best_len = tok.size();
            best = cls;
        }
    };
    for (const auto& [token, cls] : tmpl.verbalizer) consider(token, cls);
    for (const auto& token : tmpl.abstain_tokens) consider(token, kAbstain);
    return best;
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 computation failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0xF]);
    }
    return out;
}

std::string cache_key(const EndpointConfig& endpoint, const std::string& prompt) {
    json id = {{"base_url", endpoint.base_url}, {"max_tokens", endpoint.max_tokens}, {"temperature", 0},
               {"prompt", prompt}};
    return sha256_hex(id.dump());
}

std::string http_completion(const EndpointConfig& endpoint, const std::string& prompt) {
    const auto url = split_url(endpoint.base_url);
    httplib::Client client(url.origin);
    const auto timeout_s = endpoint.request_timeout_ms / 1000;
    const auto timeout_us = (endpoint.request_timeout_ms % 1000) * 1000;
    client.set_connection_timeout(timeout_s, timeout_us);
    client.set_read_timeout(timeout_s, timeout_us);
    client.set_write_timeout(timeout_s, timeout_us);

    httplib::Headers headers;
    if (!endpoint.auth_token_env_var_name.empty()) {
        // Read at call time; never stored.
        if (const char* token = std::getenv(endpoint.auth_token_env_var_name.c_str())) {
            headers.emplace("Authorization", std::string("Bearer ") + token);
        }
    }
    const json body = {{"prompt", prompt}, {"max_tokens", endpoint.max_tokens}, {"temperature", 0}};
    const std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= endpoint.max_retries; ++attempt) {
        auto res = client.Post(url.path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP status " + std::to_string(res->status);
            continue;
        }
        json reply;
        try {
            reply = json::parse(res->body);
        } catch (const json::exception&) {
            throw MalformedReplyError("endpoint reply is not JSON");
        }
        if (!reply.is_object() || !reply.contains("text") || !reply["text"].is_string()) {
            throw MalformedReplyError("endpoint reply lacks a string 'text' field");
        }
        return reply["text"].get<std::string>();
    }
    throw EndpointError("request failed after " + std::to_string(endpoint.max_retries + 1) +
                        " attempts: " + last_error);
}

LabelingRun build_matrix(const TaskDescriptor& descriptor, const PromptTemplate& tmpl, const EndpointConfig& endpoint,
                         PromptMode mode, const CompletionTransport& transport) {
    endpoint.validate();
    tmpl.validate(descriptor.label_space);
    if (descriptor.example_records.empty()) throw ValidationError("task descriptor has no example records");
    if (descriptor.explanations.empty()) throw ValidationError("task descriptor has no explanations");

    std::vector<std::string> example_ids;
    for (const auto& r : descriptor.example_records) example_ids.push_back(r.id);
    std::vector<std::string> explanation_ids;
    std::vector<Job> jobs;
    if (mode == PromptMode::per_explanation) {
        for (const auto& e : descriptor.explanations) explanation_ids.push_back(e.id);
        for (std::size_t i = 0; i < descriptor.example_records.size(); ++i) {
            for (std::size_t j = 0; j < descriptor.explanations.size(); ++j) {
                jobs.push_back({i, j, render_prompt(tmpl, descriptor.explanations[j].text,
                                                    descriptor.example_records[i].serialized_features)});
            }
        }
    } else {
        std::string joined;
        for (const auto& e : descriptor.explanations) {
            if (!joined.empty()) joined += tmpl.explanation_separator;
            joined += e.text;
        }
        explanation_ids.push_back("concat");
        for (std::size_t i = 0; i < descriptor.example_records.size(); ++i) {
            jobs.push_back({i, 0, render_prompt(tmpl, joined, descriptor.example_records[i].serialized_features)});
        }
    }

    const std::size_t m = explanation_ids.size();
    std::vector<int> cells(example_ids.size() * m, kAbstain);
    std::vector<std::optional<LabelLogEntry>> entries(jobs.size());
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> sent{0};
    std::atomic<std::size_t> hits{0};
    std::atomic<bool> failed{false};
    std::exception_ptr fatal;
    std::mutex fatal_mutex;
    std::filesystem::create_directories(endpoint.cache_dir);

    auto worker = [&] {
        for (std::size_t idx = next++; idx < jobs.size(); idx = next++) {
            const auto& job = jobs[idx];
            const auto path = endpoint.cache_dir / (cache_key(endpoint, job.prompt) + ".json");
            std::optional<std::string> completion;
            std::string error;
            try {
                if (std::filesystem::exists(path)) {
                    completion = json::parse(read_file(path)).at("completion").get<std::string>();
                    ++hits;
                } else if (endpoint.offline) {
                    throw EndpointError("cache miss while offline");
                } else {
                    ++sent;
                    completion = transport(endpoint, job.prompt);
                    const json entry = {{"prompt", job.prompt}, {"completion", *completion},
                                        {"timestamp", utc_timestamp_now()}};
                    auto tmp = path;
                    tmp += ".tmp" + std::to_string(idx);
                    write_file(tmp, entry.dump(2) + "\n");
                    std::filesystem::rename(tmp, path);
                }
            } catch (const MalformedReplyError&) {
                std::lock_guard lock(fatal_mutex);
                if (!fatal) fatal = std::current_exception();
                return;
            } catch (const EndpointError& e) {
                error = e.what();
                failed = true;
            } catch (const std::exception&) {
                // Corrupt cache entries and I/O failures abort the run.
                std::lock_guard lock(fatal_mutex);
                if (!fatal) fatal = std::current_exception();
                return;
            }
            const auto cell_index = job.row * m + job.col;
            if (completion) cells[cell_index] = verbalize(tmpl, *completion);
            if (!error.empty() || (completion && cells[cell_index] == kAbstain)) {
                entries[idx] = LabelLogEntry{example_ids[job.row], explanation_ids[job.col],
                                             completion.value_or(""), error};
            }
        }
    };

    const std::size_t threads = std::min(endpoint.max_in_flight, jobs.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (fatal) std::rethrow_exception(fatal);

    LabelingRun run{LabelingMatrix(example_ids, explanation_ids, std::move(cells), descriptor.label_space),
                    !failed.load(), sent.load(), hits.load(), {}};
    for (auto& e : entries) {
        if (e) run.log.push_back(std::move(*e));
    }
    return run;
}

}  // namespace talc
