#include "synthctx/augment.hpp"

#include <httplib.h>

#include <cstdlib>
#include <ctime>
#include <thread>

#include "synthctx/error.hpp"
#include "synthctx/hash.hpp"

namespace synthctx::augment {

namespace {

constexpr std::string_view kCreativeSystem = "You are a helpful AI assistant and you are good at creative writing.";

std::vector<PromptTemplate> build_templates() {
    std::vector<PromptTemplate> t;
    t.push_back({TemplateId::mdqa_paraphrase, std::string(kCreativeSystem),
                 "Rewrite the following sentence to Wikipedia style with additional details: {sentence}\n"
                 "Make sure that readers can correctly answer the following question by reading your rewritten "
                 "sentence:\n"
                 "Question: {question}\n"
                 "Answer: {answer}"});
    t.push_back({TemplateId::mdqa_context, std::string(kCreativeSystem),
                 "Please make up a 100-word Wikipedia paragraph for the following fake entities: {entity}. Invent "
                 "details about people, places, and work related to each entity, and make sure all details are "
                 "not related to any real-world entities. Give a short, meaningful title to your generated "
                 "paragraph. After making up the paragraph, please generate a who/when/where/what/why question "
                 "that:\n"
                 "(1) is related to the given fake entities;\n"
                 "(2) one can use the paragraph to correctly infer the answer within one or two words;\n"
                 "(3) is not a direct copy of a sentence from the paragraph. Please also include the gold answer "
                 "to the generated question.\n"
                 "Please give your response in the format:\n"
                 "Title: [title]\n"
                 "Text: [text]\n"
                 "Question: [question]\n"
                 "Answer:[answer]"});
    t.push_back({TemplateId::musique_sentence, std::nullopt,
                 "Please make up a single sentence for each of the following fake entities in the style of a "
                 "wikipedia article.\n"
                 "{fake_entities}\n"
                 "Please give your response in the format:\n"
                 "Title: [title]\n"
                 "Text: [text]"});
    t.push_back({TemplateId::musique_context, std::nullopt,
                 "Please make up a 5-sentence wikipedia paragraph for the following fake entities. Invent details "
                 "about people, places, and work related to each entity.\n"
                 "{fake_entities}\n"
                 "Please give your response in the format:\n"
                 "Title: [title]\n"
                 "Text: [text]"});
    t.push_back({TemplateId::summhay_rephrase, std::nullopt, "Please rephrase the sentence: \"{text}\""});
    t.push_back({TemplateId::summhay_simplify, std::nullopt,
                 "Please simplify and shorten the following sentence. Remove details: \"{sentence}\""});
    t.push_back({TemplateId::summhay_split, std::nullopt,
                 "Please break up the following sentence into multiple sentences: \"{text}\""});
    t.push_back({TemplateId::training_qa, std::nullopt,
                 "The following are given passages.\n"
                 "{context}\n"
                 "Answer the question based on the given passages. Only give me the answer and do not output any "
                 "other words.\n"
                 "Question: {question}\n"
                 "Answer:"});
    t.push_back({TemplateId::training_cite, std::nullopt,
                 "The following are given documents.\n"
                 "{context}\n"
                 "For the given statement, identify the documents that contain the information by citing the "
                 "numbers associated with those documents in brackets. For example, if the information in the "
                 "statement is only found in Document 3, then respond with \"[3]\". If the information is "
                 "contained in both Document 3 and Document 7, then respond with \"[3][7]\". Only output the "
                 "answer and do not output any other words.\n"
                 "Statement: {statement}\n"
                 "Answer:"});
    return t;
}

const std::vector<PromptTemplate>& templates() {
    static const std::vector<PromptTemplate> t = build_templates();
    return t;
}

bool is_name_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

// Calls f(literal) and f_placeholder(name) in template order.
template <typename Lit, typename Ph>
void walk_template(std::string_view text, Lit&& on_literal, Ph&& on_placeholder) {
    std::size_t i = 0;
    std::size_t lit_start = 0;
    while (i < text.size()) {
        if (text[i] == '{') {
            std::size_t j = i + 1;
            while (j < text.size() && is_name_char(text[j])) ++j;
            if (j < text.size() && text[j] == '}' && j > i + 1) {
                on_literal(text.substr(lit_start, i - lit_start));
                on_placeholder(text.substr(i + 1, j - i - 1));
                i = j + 1;
                lit_start = i;
                continue;
            }
        }
        ++i;
    }
    on_literal(text.substr(lit_start));
}

struct Endpoint {
    std::string scheme_host_port;
    std::string path;
};

Endpoint split_endpoint(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) throw ConfigError("backend endpoint '" + url + "' lacks a scheme");
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

std::string_view to_string(TemplateId id) noexcept {
    switch (id) {
        case TemplateId::mdqa_paraphrase: return "mdqa-paraphrase";
        case TemplateId::mdqa_context: return "mdqa-context";
        case TemplateId::musique_sentence: return "musique-sentence";
        case TemplateId::musique_context: return "musique-context";
        case TemplateId::summhay_rephrase: return "summhay-rephrase";
        case TemplateId::summhay_simplify: return "summhay-simplify";
        case TemplateId::summhay_split: return "summhay-split";
        case TemplateId::training_qa: return "training-qa";
        case TemplateId::training_cite: return "training-cite";
    }
    return "?";
}

const std::vector<TemplateId>& all_templates() {
    static const std::vector<TemplateId> ids = {
        TemplateId::mdqa_paraphrase,  TemplateId::mdqa_context,     TemplateId::musique_sentence,
        TemplateId::musique_context,  TemplateId::summhay_rephrase, TemplateId::summhay_simplify,
        TemplateId::summhay_split,    TemplateId::training_qa,      TemplateId::training_cite,
    };
    return ids;
}

TemplateId parse_template_id(std::string_view s) {
    for (auto id : all_templates()) {
        if (to_string(id) == s) return id;
    }
    throw TemplateError("unknown template_id '" + std::string(s) + "'");
}

std::set<std::string> PromptTemplate::placeholders() const {
    std::set<std::string> names;
    walk_template(user_text, [](std::string_view) {}, [&](std::string_view n) { names.emplace(n); });
    return names;
}

const PromptTemplate& prompt_template(TemplateId id) {
    for (const auto& t : templates()) {
        if (t.id == id) return t;
    }
    throw TemplateError("no template registered for id");
}

RenderedPrompt render_prompt(TemplateId id, const Params& params) {
    const auto& tpl = prompt_template(id);
    const auto names = tpl.placeholders();
    for (const auto& n : names) {
        if (!params.contains(n)) {
            throw TemplateError(std::string(to_string(id)) + ": missing parameter '" + n + "'");
        }
    }
    for (const auto& [k, v] : params) {
        if (!names.contains(k)) {
            throw TemplateError(std::string(to_string(id)) + ": unexpected parameter '" + k + "'");
        }
    }
    RenderedPrompt out;
    out.system_text = tpl.system_text;
    walk_template(
        tpl.user_text, [&](std::string_view lit) { out.user_text.append(lit); },
        [&](std::string_view n) { out.user_text.append(params.at(std::string(n))); });
    return out;
}

BackendConfig backend_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("backend config must be an object");
    static const std::set<std::string> known = {"endpoint",   "model",      "temperature", "max_output_tokens",
                                                "auth_env",   "mode",       "max_retries", "backoff_ms",
                                                "max_in_flight", "timeout_s", "cache"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.contains(it.key())) throw ConfigError("backend config: unknown key '" + it.key() + "'");
    }
    BackendConfig b;
    try {
        b.endpoint = j.value("endpoint", std::string{});
        b.model = j.at("model").get<std::string>();
        b.decoding.temperature = j.value("temperature", 0.7);
        b.decoding.max_output_tokens = j.value("max_output_tokens", 512);
        if (j.contains("auth_env") && !j["auth_env"].is_null()) b.auth_env = j["auth_env"].get<std::string>();
        const std::string mode = j.value("mode", std::string("cache-only"));
        if (mode == "live") {
            b.mode = BackendMode::live;
        } else if (mode == "cache-only") {
            b.mode = BackendMode::cache_only;
        } else {
            throw ConfigError("backend mode must be 'live' or 'cache-only'");
        }
        b.max_retries = j.value("max_retries", 3);
        b.backoff_ms = j.value("backoff_ms", 200);
        b.max_in_flight = j.value("max_in_flight", std::size_t{4});
        b.timeout_s = j.value("timeout_s", 120);
        if (j.contains("cache") && !j["cache"].is_null()) b.cache_path = j["cache"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("backend config: ") + e.what());
    }
    if (b.model.empty()) throw ConfigError("backend config: model is empty");
    if (b.mode == BackendMode::live && b.endpoint.empty()) throw ConfigError("live backend needs an endpoint");
    if (b.max_retries < 0 || b.backoff_ms < 0) throw ConfigError("backend retry settings must be >= 0");
    if (b.max_in_flight < 1 || b.max_in_flight > 1024) throw ConfigError("max_in_flight must lie in [1, 1024]");
    return b;
}

std::string request_hash(TemplateId id, const Params& params, const BackendConfig& backend) {
    json key;  // std::map-backed: keys serialize sorted
    key["template_id"] = to_string(id);
    key["params"] = params;
    key["backend_id"] = backend.backend_id();
    key["temperature"] = backend.decoding.temperature;
    key["max_output_tokens"] = backend.decoding.max_output_tokens;
    return sha256_hex(key.dump());
}

ResponseCache::ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
    if (!std::filesystem::exists(*path_)) return;
    const std::string content = read_file(*path_);
    std::size_t lineno = 0;
    for (auto line : split_lines(content)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            entries_.try_emplace(j.at("request_hash").get<std::string>(), j.at("response_text").get<std::string>());
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path_->string() + ":" + std::to_string(lineno) + ": bad cache record: " + e.what());
        }
    }
}

std::optional<std::string> ResponseCache::lookup(const std::string& hash) const {
    std::shared_lock lock(mu_);
    auto it = entries_.find(hash);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

bool ResponseCache::store(const AugmentRecord& record) {
    std::unique_lock lock(mu_);
    if (!entries_.try_emplace(record.request_hash, record.response_text).second) return false;
    if (path_) {
        ordered_json j;
        j["request_hash"] = record.request_hash;
        j["response_text"] = record.response_text;
        j["timestamp"] = record.timestamp;
        if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
        std::ofstream out(*path_, std::ios::binary | std::ios::app);
        if (!out) throw IoError("cannot append to cache '" + path_->string() + "'");
        out << dump_line(j) << '\n';
        out.flush();
        if (!out) throw IoError("write failure on cache '" + path_->string() + "'");
    }
    return true;
}

std::size_t ResponseCache::size() const {
    std::shared_lock lock(mu_);
    return entries_.size();
}

std::string HttpTransport::complete(const BackendConfig& backend, const RenderedPrompt& prompt) {
    const auto ep = split_endpoint(backend.endpoint);
    httplib::Client client(ep.scheme_host_port);
    client.set_connection_timeout(backend.timeout_s, 0);
    client.set_read_timeout(backend.timeout_s, 0);

    json body;
    body["model"] = backend.model;
    body["messages"] = json::array();
    if (prompt.system_text) body["messages"].push_back({{"role", "system"}, {"content", *prompt.system_text}});
    body["messages"].push_back({{"role", "user"}, {"content", prompt.user_text}});
    body["temperature"] = backend.decoding.temperature;
    body["max_tokens"] = backend.decoding.max_output_tokens;

    httplib::Headers headers;
    if (backend.auth_env) {
        const char* token = std::getenv(backend.auth_env->c_str());
        if (!token) throw ConfigError("auth variable '" + *backend.auth_env + "' is not set");
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }
    auto res = client.Post(ep.path, headers, body.dump(), "application/json");
    if (!res) throw BackendError("request to '" + backend.endpoint + "' failed: " + httplib::to_string(res.error()), 0);
    if (res->status < 200 || res->status >= 300) {
        throw BackendError("backend returned HTTP " + std::to_string(res->status), 0);
    }
    try {
        const json reply = json::parse(res->body);
        if (reply.contains("text")) return reply["text"].get<std::string>();
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw BackendError(std::string("unreadable backend reply: ") + e.what(), 0);
    }
}

Augmenter::Augmenter(BackendConfig backend, std::shared_ptr<ResponseCache> cache,
                     std::shared_ptr<Transport> transport)
    : backend_(std::move(backend)),
      cache_(cache ? std::move(cache) : std::make_shared<ResponseCache>()),
      transport_(std::move(transport)),
      in_flight_(static_cast<std::ptrdiff_t>(backend_.max_in_flight)) {}

std::string Augmenter::augment(TemplateId id, const Params& params) {
    const RenderedPrompt prompt = render_prompt(id, params);
    const std::string hash = request_hash(id, params, backend_);
    {
        std::lock_guard lock(prov_mu_);
        provenance_.insert({std::string(to_string(id)), backend_.backend_id()});
    }
    if (auto hit = cache_->lookup(hash)) return *hit;
    if (backend_.mode == BackendMode::cache_only) {
        throw CacheMissError(std::string(to_string(id)) + ": no cached response for request " + hash.substr(0, 12) +
                             " in cache-only mode");
    }

    in_flight_.acquire();
    struct Release {
        std::counting_semaphore<1024>& s;
        ~Release() { s.release(); }
    } release{in_flight_};

    std::string last_error;
    for (int attempt = 0; attempt <= backend_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long long>(backend_.backoff_ms)
                                                                  << (attempt - 1)));
        }
        try {
            ++network_calls_;
            std::string text = transport_->complete(backend_, prompt);
            cache_->store({hash, text, utc_timestamp()});
            return *cache_->lookup(hash);
        } catch (const BackendError& e) {
            last_error = e.what();
        }
    }
    throw BackendError(last_error, backend_.max_retries);
}

std::vector<PromptProvenance> Augmenter::provenance() const {
    std::lock_guard lock(prov_mu_);
    return {provenance_.begin(), provenance_.end()};
}

std::map<std::string, std::string> parse_labeled_fields(std::string_view response,
                                                        const std::vector<std::string>& labels) {
    struct Hit {
        std::size_t label_start;
        std::size_t value_start;
        std::string label;
    };
    std::vector<Hit> hits;
    std::set<std::string> seen;
    std::size_t pos = 0;
    while (pos <= response.size()) {
        std::size_t end = response.find('\n', pos);
        if (end == std::string_view::npos) end = response.size();
        std::size_t s = pos;
        while (s < end && (response[s] == ' ' || response[s] == '\t')) ++s;
        for (const auto& label : labels) {
            const std::string marker = label + ":";
            if (response.substr(s, end - s).starts_with(marker) && !seen.contains(label)) {
                seen.insert(label);
                hits.push_back({s, s + marker.size(), label});
                break;
            }
        }
        pos = end + 1;
    }
    std::vector<std::string> missing;
    for (const auto& label : labels) {
        if (!seen.contains(label)) {
            std::string lower = label;
            for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            missing.push_back(lower);
        }
    }
    if (!missing.empty()) throw MissingFieldsError(missing);

    auto trim = [](std::string_view v) {
        while (!v.empty() && std::isspace(static_cast<unsigned char>(v.front()))) v.remove_prefix(1);
        while (!v.empty() && std::isspace(static_cast<unsigned char>(v.back()))) v.remove_suffix(1);
        return std::string(v);
    };
    std::map<std::string, std::string> out;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        const std::size_t stop = i + 1 < hits.size() ? hits[i + 1].label_start : response.size();
        out[hits[i].label] = trim(response.substr(hits[i].value_start, stop - hits[i].value_start));
    }
    return out;
}

GeneratedContext parse_generated_context(std::string_view response) {
    auto f = parse_labeled_fields(response, {"Title", "Text", "Question", "Answer"});
    return {f["Title"], f["Text"], f["Question"], f["Answer"]};
}

std::string render_context(const Example& ex) {
    std::string out;
    for (const auto& d : ex.documents) {
        if (!out.empty()) out += '\n';
        out += "Document [" + std::to_string(d.doc_id) + "]: ";
        if (ex.task != Task::summhay_cite && d.title) out += "(Title: " + *d.title + ") ";
        out += d.body;
    }
    return out;
}

RenderedPrompt render_training_prompt(const Example& ex) {
    if (ex.task == Task::summhay_cite) {
        return render_prompt(TemplateId::training_cite, {{"context", render_context(ex)}, {"statement", ex.query}});
    }
    return render_prompt(TemplateId::training_qa, {{"context", render_context(ex)}, {"question", ex.query}});
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace synthctx::augment
