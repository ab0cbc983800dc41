#include "synthctx/dataset_io.hpp"

#include <initializer_list>

#include "synthctx/error.hpp"
#include "synthctx/hash.hpp"

namespace synthctx {

namespace {

void reject_unknown(const json& j, std::string_view what, std::initializer_list<std::string_view> known) {
    if (!j.is_object()) throw ParseError(std::string(what) + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (auto k : known) ok = ok || it.key() == k;
        if (!ok) throw ParseError(std::string(what) + ": unknown field '" + it.key() + "'");
    }
}

const json& field(const json& j, std::string_view what, const char* name) {
    auto it = j.find(name);
    if (it == j.end()) throw ParseError(std::string(what) + ": missing field '" + name + "'");
    return *it;
}

template <typename T>
T get_as(const json& j, std::string_view what, const char* name) {
    const json& v = field(j, what, name);
    try {
        if constexpr (std::is_unsigned_v<T>) {
            if (!v.is_number_unsigned()) throw ParseError("");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ParseError("");
        }
        return v.get<T>();
    } catch (const std::exception&) {
        throw ParseError(std::string(what) + ": field '" + name + "' has the wrong type");
    }
}

Variant variant_from_json(const json& j) {
    reject_unknown(j, "variant", {"concept_expression", "context_diversity"});
    Variant v;
    v.concept_expression = parse_concept_expression(get_as<std::string>(j, "variant", "concept_expression"));
    v.context_diversity = parse_context_diversity(get_as<std::string>(j, "variant", "context_diversity"));
    return v;
}

ordered_json to_json(const Variant& v) {
    ordered_json j;
    j["concept_expression"] = to_string(v.concept_expression);
    j["context_diversity"] = to_string(v.context_diversity);
    return j;
}

NeedleSpan needle_from_json(const json& j) {
    reject_unknown(j, "needle", {"doc_id", "char_start", "char_end", "needle_index"});
    NeedleSpan s;
    s.doc_id = get_as<std::uint64_t>(j, "needle", "doc_id");
    s.char_start = get_as<std::size_t>(j, "needle", "char_start");
    s.char_end = get_as<std::size_t>(j, "needle", "char_end");
    s.needle_index = get_as<std::size_t>(j, "needle", "needle_index");
    return s;
}

template <typename F>
auto wrap_enum(F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ValidationError& e) {
        throw ParseError(e.what());
    }
}

}  // namespace

ordered_json to_json(const Document& d) {
    ordered_json j;
    j["doc_id"] = d.doc_id;
    j["title"] = d.title ? ordered_json(*d.title) : ordered_json(nullptr);
    j["body"] = d.body;
    return j;
}

ordered_json to_json(const NeedleSpan& s) {
    ordered_json j;
    j["doc_id"] = s.doc_id;
    j["char_start"] = s.char_start;
    j["char_end"] = s.char_end;
    j["needle_index"] = s.needle_index;
    return j;
}

ordered_json to_json(const Example& ex) {
    ordered_json j;
    j["example_id"] = ex.example_id;
    j["task"] = to_string(ex.task);
    j["variant"] = to_json(ex.variant);
    j["documents"] = ordered_json::array();
    for (const auto& d : ex.documents) j["documents"].push_back(to_json(d));
    j["query"] = ex.query;
    j["gold_answer"] = ex.gold_answer;
    j["needles"] = ordered_json::array();
    for (const auto& n : ex.needles) j["needles"].push_back(to_json(n));
    j["seed"] = ex.seed;
    return j;
}

ordered_json to_json(const TokenizerSpec& t) {
    ordered_json j;
    j["mode"] = to_string(t.mode);
    j["vocab_ref"] = t.vocab_ref ? ordered_json(*t.vocab_ref) : ordered_json(nullptr);
    j["calibration"] = t.calibration;
    return j;
}

ordered_json to_json(const DatasetManifest& m) {
    ordered_json j;
    j["dataset_id"] = m.dataset_id;
    j["task"] = to_string(m.task);
    j["variant"] = to_json(m.variant);
    j["count"] = m.count;
    j["master_seed"] = m.master_seed;
    j["token_budget"] = m.token_budget;
    j["tokenizer"] = to_json(m.tokenizer);
    j["tool_version"] = m.tool_version;
    j["created_at"] = m.created_at;
    if (m.prompt_provenance) {
        ordered_json arr = ordered_json::array();
        for (const auto& p : *m.prompt_provenance) {
            ordered_json e;
            e["template_id"] = p.template_id;
            e["backend_id"] = p.backend_id;
            arr.push_back(std::move(e));
        }
        j["prompt_provenance"] = std::move(arr);
    } else {
        j["prompt_provenance"] = nullptr;
    }
    return j;
}

Document document_from_json(const json& j) {
    reject_unknown(j, "document", {"doc_id", "title", "body"});
    Document d;
    d.doc_id = get_as<std::uint64_t>(j, "document", "doc_id");
    if (auto it = j.find("title"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) throw ParseError("document: field 'title' has the wrong type");
        d.title = it->get<std::string>();
    }
    d.body = get_as<std::string>(j, "document", "body");
    return d;
}

Example example_from_json(const json& j) {
    reject_unknown(j, "example", {"example_id", "task", "variant", "documents", "query", "gold_answer",
                                  "needles", "seed"});
    Example ex;
    ex.example_id = get_as<std::string>(j, "example", "example_id");
    ex.task = wrap_enum([&] { return parse_task(get_as<std::string>(j, "example", "task")); });
    ex.variant = wrap_enum([&] { return variant_from_json(field(j, "example", "variant")); });
    const json& docs = field(j, "example", "documents");
    if (!docs.is_array()) throw ParseError("example: field 'documents' must be an array");
    for (const auto& d : docs) ex.documents.push_back(document_from_json(d));
    ex.query = get_as<std::string>(j, "example", "query");
    ex.gold_answer = get_as<std::string>(j, "example", "gold_answer");
    const json& needles = field(j, "example", "needles");
    if (!needles.is_array()) throw ParseError("example: field 'needles' must be an array");
    for (const auto& n : needles) ex.needles.push_back(needle_from_json(n));
    ex.seed = get_as<std::uint64_t>(j, "example", "seed");
    return ex;
}

TokenizerSpec tokenizer_from_json(const json& j) {
    reject_unknown(j, "tokenizer", {"mode", "vocab_ref", "calibration"});
    TokenizerSpec t;
    t.mode = wrap_enum([&] { return parse_tokenizer_mode(get_as<std::string>(j, "tokenizer", "mode")); });
    if (auto it = j.find("vocab_ref"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) throw ParseError("tokenizer: field 'vocab_ref' has the wrong type");
        t.vocab_ref = it->get<std::string>();
    }
    if (auto it = j.find("calibration"); it != j.end()) {
        if (!it->is_number()) throw ParseError("tokenizer: field 'calibration' has the wrong type");
        t.calibration = it->get<double>();
    }
    return t;
}

DatasetManifest manifest_from_json(const json& j) {
    reject_unknown(j, "manifest", {"dataset_id", "task", "variant", "count", "master_seed", "token_budget",
                                   "tokenizer", "tool_version", "created_at", "prompt_provenance"});
    DatasetManifest m;
    m.dataset_id = get_as<std::string>(j, "manifest", "dataset_id");
    m.task = wrap_enum([&] { return parse_task(get_as<std::string>(j, "manifest", "task")); });
    m.variant = wrap_enum([&] { return variant_from_json(field(j, "manifest", "variant")); });
    m.count = get_as<std::size_t>(j, "manifest", "count");
    m.master_seed = get_as<std::uint64_t>(j, "manifest", "master_seed");
    m.token_budget = get_as<std::size_t>(j, "manifest", "token_budget");
    m.tokenizer = tokenizer_from_json(field(j, "manifest", "tokenizer"));
    m.tool_version = get_as<std::string>(j, "manifest", "tool_version");
    m.created_at = get_as<std::string>(j, "manifest", "created_at");
    if (auto it = j.find("prompt_provenance"); it != j.end() && !it->is_null()) {
        if (!it->is_array()) throw ParseError("manifest: field 'prompt_provenance' must be an array");
        std::vector<PromptProvenance> pp;
        for (const auto& e : *it) {
            reject_unknown(e, "prompt_provenance", {"template_id", "backend_id"});
            pp.push_back({get_as<std::string>(e, "prompt_provenance", "template_id"),
                          get_as<std::string>(e, "prompt_provenance", "backend_id")});
        }
        m.prompt_provenance = std::move(pp);
    }
    return m;
}

std::string dump_line(const ordered_json& j) {
    try {
        return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("cannot encode record: ") + e.what());
    }
}

std::string serialize_example(const Example& ex) { return dump_line(to_json(ex)); }

Example parse_example(std::string_view line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("example: malformed JSON: ") + e.what());
    }
    return example_from_json(j);
}

std::vector<std::string_view> split_lines(std::string_view content) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < content.size()) {
        std::size_t end = content.find('\n', start);
        if (end == std::string_view::npos) end = content.size();
        lines.push_back(content.substr(start, end - start));
        start = end + 1;
    }
    return lines;
}

std::string serialize_dataset(const DatasetManifest& manifest, std::span<const Example> examples) {
    std::string out = dump_line(to_json(manifest));
    out += '\n';
    for (const auto& ex : examples) {
        out += serialize_example(ex);
        out += '\n';
    }
    return out;
}

Dataset parse_dataset(std::string_view content) {
    auto lines = split_lines(content);
    if (lines.empty()) throw ParseError("dataset: empty file (missing manifest record)");
    Dataset ds;
    try {
        ds.manifest = manifest_from_json(json::parse(lines[0]));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("dataset line 1: malformed JSON: ") + e.what());
    } catch (const ParseError& e) {
        throw ParseError(std::string("dataset line 1: ") + e.what());
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        try {
            ds.examples.push_back(parse_example(lines[i]));
        } catch (const ParseError& e) {
            throw ParseError("dataset line " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return ds;
}

void write_dataset(const std::filesystem::path& path, const DatasetManifest& manifest,
                   std::span<const Example> examples) {
    write_file(path, serialize_dataset(manifest, examples));
}

Dataset read_dataset(const std::filesystem::path& path) { return parse_dataset(read_file(path)); }

std::vector<Document> read_document_pool(const std::filesystem::path& path) {
    const std::string content = read_file(path);
    std::vector<Document> docs;
    std::size_t lineno = 0;
    for (auto line : split_lines(content)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            docs.push_back(document_from_json(json::parse(line)));
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": malformed JSON: " + e.what());
        } catch (const ParseError& e) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return docs;
}

}  // namespace synthctx
