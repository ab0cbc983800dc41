#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "synthctx/core.hpp"
#include "synthctx/dataset_io.hpp"

// Provider-agnostic text-generation client: prompt templates, a
// content-addressed response cache and an HTTP transport.
namespace synthctx::augment {

enum class TemplateId {
    mdqa_paraphrase,
    mdqa_context,
    musique_sentence,
    musique_context,
    summhay_rephrase,
    summhay_simplify,
    summhay_split,
    training_qa,
    training_cite,
};

std::string_view to_string(TemplateId id) noexcept;
TemplateId parse_template_id(std::string_view s);
const std::vector<TemplateId>& all_templates();

struct PromptTemplate {
    TemplateId id;
    std::optional<std::string> system_text;
    std::string user_text;  // "{name}" placeholders

    std::set<std::string> placeholders() const;
};

const PromptTemplate& prompt_template(TemplateId id);

using Params = std::map<std::string, std::string>;

struct RenderedPrompt {
    std::optional<std::string> system_text;
    std::string user_text;
};

// Substitutes every placeholder verbatim in one pass. Throws TemplateError
// naming the first missing or unexpected parameter.
RenderedPrompt render_prompt(TemplateId id, const Params& params);

struct DecodingParams {
    double temperature = 0.7;
    int max_output_tokens = 512;
};

enum class BackendMode { live, cache_only };

struct BackendConfig {
    std::string endpoint;  // http(s)://host[:port]/path
    std::string model;
    DecodingParams decoding;
    std::optional<std::string> auth_env;  // name of the variable holding a bearer token
    BackendMode mode = BackendMode::cache_only;
    int max_retries = 3;
    int backoff_ms = 200;
    std::size_t max_in_flight = 4;
    int timeout_s = 120;
    std::optional<std::filesystem::path> cache_path;

    // Stable identity used in cache keys and provenance.
    const std::string& backend_id() const noexcept { return model; }
};

// Throws ConfigError on unknown keys or bad values. Secrets are never read
// from the config, only the variable name.
BackendConfig backend_from_json(const json& j);

struct AugmentRecord {
    std::string request_hash;
    std::string response_text;
    std::string timestamp;
};

std::string request_hash(TemplateId id, const Params& params, const BackendConfig& backend);

// Line-delimited AugmentRecord store. Loaded once, appended on every miss.
// Many concurrent readers, one writer at a time.
class ResponseCache {
  public:
    ResponseCache() = default;  // in-memory only
    explicit ResponseCache(std::filesystem::path path);

    std::optional<std::string> lookup(const std::string& hash) const;
    // First write wins; returns false if the hash was already present.
    bool store(const AugmentRecord& record);
    std::size_t size() const;

  private:
    std::optional<std::filesystem::path> path_;
    mutable std::shared_mutex mu_;
    std::unordered_map<std::string, std::string> entries_;
};

// One request/response exchange with a backend; throws on failure.
class Transport {
  public:
    virtual ~Transport() = default;
    virtual std::string complete(const BackendConfig& backend, const RenderedPrompt& prompt) = 0;
};

// Request:  POST <endpoint>, JSON {"model", "messages": [{"role", "content"}...],
//           "temperature", "max_tokens"}; Authorization: Bearer $<auth_env>.
// Response: JSON with "text", or OpenAI-style choices[0].message.content.
class HttpTransport : public Transport {
  public:
    std::string complete(const BackendConfig& backend, const RenderedPrompt& prompt) override;
};

class Augmenter {
  public:
    Augmenter(BackendConfig backend, std::shared_ptr<ResponseCache> cache,
              std::shared_ptr<Transport> transport = std::make_shared<HttpTransport>());

    // Cache hit: stored text. Live miss: call the backend (with exponential
    // backoff), record, return. Cache-only miss: CacheMissError.
    std::string augment(TemplateId id, const Params& params);

    std::size_t network_calls() const noexcept { return network_calls_.load(); }
    const BackendConfig& backend() const noexcept { return backend_; }
    std::vector<PromptProvenance> provenance() const;

  private:
    BackendConfig backend_;
    std::shared_ptr<ResponseCache> cache_;
    std::shared_ptr<Transport> transport_;
    std::counting_semaphore<1024> in_flight_;
    std::atomic<std::size_t> network_calls_{0};
    mutable std::mutex prov_mu_;
    std::set<PromptProvenance> provenance_;
};

struct GeneratedContext {
    std::string title;
    std::string text;
    std::string question;
    std::string answer;
};

// Extracts "Label:" fields that start a line. The first line-start
// occurrence of each label wins; later ones stay in the current field's
// text. Throws MissingFieldsError listing absent labels (lowercase).
std::map<std::string, std::string> parse_labeled_fields(std::string_view response,
                                                        const std::vector<std::string>& labels);
GeneratedContext parse_generated_context(std::string_view response);

// "Document [i]: (Title: t) body" per document for QA tasks,
// "Document [i]: body" for citation.
std::string render_context(const Example& ex);
RenderedPrompt render_training_prompt(const Example& ex);

std::string utc_timestamp();

}  // namespace synthctx::augment
