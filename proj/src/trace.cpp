#include "synthctx/trace.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include <json.hpp>

#include "synthctx/dataset_io.hpp"
#include "synthctx/error.hpp"

namespace synthctx {

namespace {

// Thrown inside the decoders, turned into TraceFormatError by the reader.
struct FieldError {
    std::string field;
    std::string detail;
};

void reject_unknown(const json& j, std::initializer_list<std::string_view> known) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
            throw FieldError{it.key(), "unknown field"};
        }
    }
}

const json& field(const json& j, const char* name) {
    auto it = j.find(name);
    if (it == j.end()) throw FieldError{name, "missing"};
    return *it;
}

std::string get_string(const json& j, const char* name) {
    const json& v = field(j, name);
    if (!v.is_string()) throw FieldError{name, "expected a string"};
    return v.get<std::string>();
}

std::uint64_t as_unsigned(const json& v, const std::string& name) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw FieldError{name, "expected a non-negative integer"};
}

Position as_position(const json& v, const std::string& name) {
    const auto x = as_unsigned(v, name);
    if (x > std::numeric_limits<Position>::max()) throw FieldError{name, "position exceeds 32 bits"};
    return static_cast<Position>(x);
}

TokenId as_token(const json& v, const std::string& name) {
    const auto x = as_unsigned(v, name);
    if (x > static_cast<std::uint64_t>(std::numeric_limits<TokenId>::max())) throw FieldError{name, "token id too large"};
    return static_cast<TokenId>(x);
}

std::vector<TokenSpan> get_spans(const json& j, const char* name) {
    const json& v = field(j, name);
    if (!v.is_array()) throw FieldError{name, "expected an array of [start, end] pairs"};
    std::vector<TokenSpan> spans;
    spans.reserve(v.size());
    for (const auto& s : v) {
        if (!s.is_array() || s.size() != 2) throw FieldError{name, "expected [start, end] pairs"};
        spans.push_back({as_position(s[0], name), as_position(s[1], name)});
    }
    return spans;
}

TraceHeader header_from_json(const json& j) {
    if (!j.is_object()) throw FieldError{"header", "expected an object"};
    reject_unknown(j, {"format", "version", "model_id", "n_layers", "n_heads", "tokenizer_hash", "dataset_id",
                       "decoding"});
    if (get_string(j, "format") != kTraceFormat) throw FieldError{"format", "not a synthctx trace file"};
    if (as_unsigned(field(j, "version"), "version") != kTraceVersion) {
        throw FieldError{"version", "unsupported version"};
    }
    TraceHeader h;
    h.model_id = get_string(j, "model_id");
    h.n_layers = as_unsigned(field(j, "n_layers"), "n_layers");
    h.n_heads = as_unsigned(field(j, "n_heads"), "n_heads");
    h.tokenizer_hash = get_string(j, "tokenizer_hash");
    h.dataset_id = get_string(j, "dataset_id");
    if (get_string(j, "decoding") != "greedy") throw FieldError{"decoding", "only greedy decoding is defined"};
    return h;
}

ExampleTrace trace_from_json(const json& j, std::size_t geometry_size) {
    if (!j.is_object()) throw FieldError{"record", "expected an object"};
    reject_unknown(j, {"example_id", "context_token_ids", "answer_token_spans", "needle_token_spans", "steps",
                       "prediction_text"});
    ExampleTrace t;
    t.example_id = get_string(j, "example_id");
    const json& ctx = field(j, "context_token_ids");
    if (!ctx.is_array()) throw FieldError{"context_token_ids", "expected an array"};
    t.context_token_ids.reserve(ctx.size());
    for (const auto& v : ctx) t.context_token_ids.push_back(as_token(v, "context_token_ids"));
    t.answer_token_spans = get_spans(j, "answer_token_spans");
    t.needle_token_spans = get_spans(j, "needle_token_spans");
    const json& steps = field(j, "steps");
    if (!steps.is_array()) throw FieldError{"steps", "expected an array"};
    t.steps.reserve(steps.size());
    for (const auto& s : steps) {
        if (!s.is_object()) throw FieldError{"steps", "expected step objects"};
        reject_unknown(s, {"step", "generated_token_id", "argmax_positions"});
        StepRecord r;
        r.step = as_unsigned(field(s, "step"), "step");
        r.generated_token_id = as_token(field(s, "generated_token_id"), "generated_token_id");
        const json& pos = field(s, "argmax_positions");
        if (!pos.is_array()) throw FieldError{"argmax_positions", "expected an array"};
        if (pos.size() != geometry_size) {
            throw FieldError{"argmax_positions", "geometry mismatch: " + std::to_string(pos.size()) +
                                                     " positions for " + std::to_string(geometry_size) + " heads"};
        }
        r.argmax_positions.reserve(pos.size());
        for (const auto& p : pos) r.argmax_positions.push_back(as_position(p, "argmax_positions"));
        t.steps.push_back(std::move(r));
    }
    t.prediction_text = get_string(j, "prediction_text");
    return t;
}

ordered_json spans_json(const std::vector<TokenSpan>& spans) {
    ordered_json a = ordered_json::array();
    for (const auto& s : spans) a.push_back({s.start, s.end});
    return a;
}

void check_spans(const std::vector<TokenSpan>& spans, std::size_t context_len, const char* name,
                 std::vector<Violation>& out) {
    std::vector<TokenSpan> sorted = spans;
    for (const auto& s : spans) {
        if (s.start >= s.end) {
            out.push_back({name, "empty or inverted span [" + std::to_string(s.start) + ", " +
                                     std::to_string(s.end) + ")"});
        } else if (s.end > context_len) {
            out.push_back({name, "span [" + std::to_string(s.start) + ", " + std::to_string(s.end) +
                                     ") exceeds context length " + std::to_string(context_len)});
        }
    }
    std::sort(sorted.begin(), sorted.end(), [](const TokenSpan& a, const TokenSpan& b) { return a.start < b.start; });
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i].start < sorted[i - 1].end) {
            out.push_back({name, "spans starting at " + std::to_string(sorted[i - 1].start) + " and " +
                                     std::to_string(sorted[i].start) + " overlap"});
        }
    }
}

}  // namespace

std::string_view to_string(Decoding) noexcept { return "greedy"; }

std::vector<Violation> validate_header(const TraceHeader& h) {
    std::vector<Violation> v;
    if (h.n_layers < 1) v.push_back({"n_layers", "must be >= 1"});
    if (h.n_heads < 1) v.push_back({"n_heads", "must be >= 1"});
    if (h.model_id.empty()) v.push_back({"model_id", "empty"});
    return v;
}

std::vector<Violation> validate_trace(const TraceHeader& header, const ExampleTrace& t) {
    std::vector<Violation> v;
    const std::size_t n = t.context_token_ids.size();
    const std::size_t g = header.n_layers * header.n_heads;
    if (t.example_id.empty()) v.push_back({"example_id", "empty"});
    if (n == 0) v.push_back({"context_token_ids", "empty context"});
    check_spans(t.answer_token_spans, n, "answer_token_spans", v);
    check_spans(t.needle_token_spans, n, "needle_token_spans", v);
    if (t.steps.empty()) v.push_back({"steps", "no decoding steps"});
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
        const auto& s = t.steps[i];
        if (i > 0 && s.step <= t.steps[i - 1].step) {
            v.push_back({"step", "step numbers must increase (step " + std::to_string(s.step) + ")"});
        }
        if (s.argmax_positions.size() != g) {
            v.push_back({"argmax_positions", "geometry mismatch at step " + std::to_string(s.step) + ": " +
                                                 std::to_string(s.argmax_positions.size()) + " positions for " +
                                                 std::to_string(g) + " heads"});
            continue;
        }
        for (std::size_t h = 0; h < g; ++h) {
            if (s.argmax_positions[h] >= n) {
                v.push_back({"argmax_positions", "step " + std::to_string(s.step) + ", head " + std::to_string(h) +
                                                     ": position " + std::to_string(s.argmax_positions[h]) +
                                                     " outside context of length " + std::to_string(n)});
                break;
            }
        }
    }
    return v;
}

std::string serialize_header(const TraceHeader& h) {
    ordered_json j;
    j["format"] = kTraceFormat;
    j["version"] = kTraceVersion;
    j["model_id"] = h.model_id;
    j["n_layers"] = h.n_layers;
    j["n_heads"] = h.n_heads;
    j["tokenizer_hash"] = h.tokenizer_hash;
    j["dataset_id"] = h.dataset_id;
    j["decoding"] = to_string(h.decoding);
    return dump_line(j);
}

std::string serialize_trace(const ExampleTrace& t) {
    ordered_json j;
    j["example_id"] = t.example_id;
    j["context_token_ids"] = t.context_token_ids;
    j["answer_token_spans"] = spans_json(t.answer_token_spans);
    j["needle_token_spans"] = spans_json(t.needle_token_spans);
    ordered_json steps = ordered_json::array();
    for (const auto& s : t.steps) {
        ordered_json r;
        r["step"] = s.step;
        r["generated_token_id"] = s.generated_token_id;
        r["argmax_positions"] = s.argmax_positions;
        steps.push_back(std::move(r));
    }
    j["steps"] = std::move(steps);
    j["prediction_text"] = t.prediction_text;
    return dump_line(j);
}

TraceWriter::TraceWriter(std::ostream& out, TraceHeader header) : out_(out), header_(std::move(header)) {
    const auto v = validate_header(header_);
    if (!v.empty()) throw ValidationError("trace header: " + v.front().code + ": " + v.front().detail);
    const std::string line = serialize_header(header_) + "\n";
    out_ << line;
    if (!out_) throw IoError("trace write failed");
    bytes_ += line.size();
}

std::size_t TraceWriter::write(const ExampleTrace& trace) {
    const auto v = validate_trace(header_, trace);
    if (!v.empty()) {
        throw ValidationError("trace '" + trace.example_id + "': " + v.front().code + ": " + v.front().detail);
    }
    const std::string line = serialize_trace(trace) + "\n";
    out_ << line;
    if (!out_) throw IoError("trace write failed");
    bytes_ += line.size();
    return line.size();
}

std::size_t write_traces(const TraceHeader& header, std::span<const ExampleTrace> traces, std::ostream& out) {
    TraceWriter w(out, header);
    for (const auto& t : traces) w.write(t);
    return w.bytes_written();
}

std::size_t write_traces(const TraceHeader& header, std::span<const ExampleTrace> traces,
                         const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    const auto n = write_traces(header, traces, out);
    out.flush();
    if (!out) throw IoError("write failure on '" + path.string() + "'");
    return n;
}

TraceReader::TraceReader(std::istream& in) : in_(&in) { read_header(); }

TraceReader::TraceReader(const std::filesystem::path& path) : file_(path, std::ios::binary), in_(&file_) {
    if (!file_) throw IoError("cannot open trace file '" + path.string() + "'");
    read_header();
}

void TraceReader::read_header() {
    std::string line;
    if (!std::getline(*in_, line)) throw TraceFormatError(0, "header", "empty trace file");
    try {
        header_ = header_from_json(json::parse(line));
    } catch (const json::exception& e) {
        throw TraceFormatError(0, "header", e.what());
    } catch (const FieldError& e) {
        throw TraceFormatError(0, e.field, e.detail);
    }
    const auto v = validate_header(header_);
    if (!v.empty()) throw TraceFormatError(0, v.front().code, v.front().detail);
}

std::optional<ExampleTrace> TraceReader::next() {
    std::string line;
    while (std::getline(*in_, line)) {
        if (line.empty()) continue;
        ++record_;
        ExampleTrace t;
        try {
            t = trace_from_json(json::parse(line), header_.n_layers * header_.n_heads);
        } catch (const json::exception& e) {
            throw TraceFormatError(record_, "record", e.what());
        } catch (const FieldError& e) {
            throw TraceFormatError(record_, e.field, e.detail);
        }
        const auto v = validate_trace(header_, t);
        if (!v.empty()) throw TraceFormatError(record_, v.front().code, v.front().detail);
        return t;
    }
    if (in_->bad()) throw IoError("trace read failure");
    return std::nullopt;
}

TraceFile parse_traces(std::istream& in) {
    TraceReader r(in);
    TraceFile f{r.header(), {}};
    while (auto t = r.next()) f.traces.push_back(std::move(*t));
    return f;
}

TraceFile read_traces(const std::filesystem::path& path) {
    TraceReader r(path);
    TraceFile f{r.header(), {}};
    while (auto t = r.next()) f.traces.push_back(std::move(*t));
    return f;
}

}  // namespace synthctx
