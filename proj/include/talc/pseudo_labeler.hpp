#pragma once

// Builds labeling matrices by prompting a text-completion endpoint once per
// (example, explanation) pair, or once per example with all explanations
// concatenated. Completions map to classes through a verbalizer; anything
// unmatched becomes an abstention. Replies are cached on disk by content hash.
//
// Wire protocol: POST {"prompt": str, "max_tokens": int, "temperature": 0}
// to base_url, reply {"text": str}.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "talc/core.hpp"
#include "talc/error.hpp"

namespace talc {

/// The endpoint answered, but not with {"text": <string>}.
class MalformedReplyError : public EndpointError {
public:
    using EndpointError::EndpointError;
};

struct PromptTemplate {
    /// Free text with {explanations}, {feature_lines} and {question} placeholders.
    std::string template_text;
    std::string question;
    /// Answer token -> class index.
    std::map<std::string, int> verbalizer;
    std::vector<std::string> abstain_tokens;
    /// Joins explanations in concat mode.
    std::string explanation_separator = ". ";

    /// Throws ValidationError unless every class has a token and tokens are
    /// disjoint across classes and abstain.
    void validate(const LabelSpace& space) const;
};

PromptTemplate parse_prompt_template_json(std::string_view json_text);

struct EndpointConfig {
    std::string base_url;
    /// Name of the environment variable holding a bearer token; empty for none.
    std::string auth_token_env_var_name;
    int request_timeout_ms = 30000;
    int max_retries = 2;
    std::filesystem::path cache_dir = ".talc_cache";
    int max_tokens = 16;
    std::size_t max_in_flight = 4;
    /// When set, never touch the network; cache misses fail as transport errors.
    bool offline = false;

    void validate() const;
};

EndpointConfig parse_endpoint_config_json(std::string_view json_text);

enum class PromptMode { per_explanation, concat };

/// Fills the template placeholders.
std::string render_prompt(const PromptTemplate& tmpl, std::string_view explanations, std::string_view feature_lines);

/// Case-insensitive match of the completion against verbalizer tokens:
/// the earliest token occurring as a whole word wins, longer tokens first on
/// equal position. Abstain tokens and no match give kAbstain.
int verbalize(const PromptTemplate& tmpl, std::string_view completion);

/// Sends one prompt and returns the completion text. Injected in tests.
using CompletionTransport = std::function<std::string(const EndpointConfig&, const std::string& prompt)>;

/// Default transport over HTTP. Throws EndpointError on transport failure,
/// after the configured retries, or on a reply without a string "text".
std::string http_completion(const EndpointConfig& endpoint, const std::string& prompt);

struct LabelLogEntry {
    std::string example_id;
    std::string explanation_id;
    std::string completion;
    std::string error;
};

struct LabelingRun {
    LabelingMatrix matrix;
    /// False when any request failed; its cell is then an abstention.
    bool complete = true;
    std::size_t requests_sent = 0;
    std::size_t cache_hits = 0;
    /// Unmatched completions and failed requests.
    std::vector<LabelLogEntry> log;
};

/// Cache key: SHA-256 over the endpoint identity and the prompt.
std::string cache_key(const EndpointConfig& endpoint, const std::string& prompt);

LabelingRun build_matrix(const TaskDescriptor& descriptor, const PromptTemplate& tmpl, const EndpointConfig& endpoint,
                         PromptMode mode, const CompletionTransport& transport = http_completion);

/// Hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view data);

}  // namespace talc
