#include "synthctx/scoring.hpp"

#include <algorithm>
#include <exception>
#include <unordered_set>

#include <json.hpp>

#include "synthctx/dataset_io.hpp"
#include "synthctx/error.hpp"
#include "synthctx/hash.hpp"

namespace synthctx {

namespace {

// Target positions of a trace mapped to a compact index, plus the token ids
// they hold (to skip steps that cannot copy anything).
struct TargetIndex {
    std::vector<std::int32_t> slot;  // per context position, -1 outside targets
    std::vector<Position> positions;
    std::unordered_set<TokenId> tokens;
};

TargetIndex index_targets(const ExampleTrace& trace, std::span<const TokenSpan> targets) {
    TargetIndex ix;
    ix.slot.assign(trace.context_token_ids.size(), -1);
    for (const auto& s : targets) {
        for (Position p = s.start; p < s.end && p < ix.slot.size(); ++p) {
            if (ix.slot[p] >= 0) continue;
            ix.slot[p] = static_cast<std::int32_t>(ix.positions.size());
            ix.positions.push_back(p);
            ix.tokens.insert(trace.context_token_ids[p]);
        }
    }
    return ix;
}

std::span<const TokenSpan> targets_for(const ExampleTrace& trace, ScoreKind kind) {
    return kind == ScoreKind::retrieval ? std::span<const TokenSpan>(trace.answer_token_spans)
                                        : std::span<const TokenSpan>(trace.needle_token_spans);
}

void require_targets(const ExampleTrace& trace, ScoreKind kind, std::size_t n_positions) {
    if (n_positions > 0) return;
    throw UndefinedMetricError("trace '" + trace.example_id + "' has no " +
                               (kind == ScoreKind::retrieval ? "answer" : "needle") +
                               " positions; the score is undefined");
}

}  // namespace

std::string_view to_string(ScoreKind k) noexcept { return k == ScoreKind::retrieval ? "retrieval" : "insight"; }

ScoreKind parse_score_kind(std::string_view s) {
    if (s == "retrieval") return ScoreKind::retrieval;
    if (s == "insight") return ScoreKind::insight;
    throw ValidationError("unknown score kind '" + std::string(s) + "'");
}

void check_score_matrix(const ScoreMatrix& m) {
    if (m.geometry.n_layers < 1 || m.geometry.n_heads < 1) throw ValidationError("score matrix: empty geometry");
    if (m.values.size() != m.geometry.size()) {
        throw ValidationError("score matrix: " + std::to_string(m.values.size()) + " values for " +
                              std::to_string(m.geometry.size()) + " heads");
    }
    if (m.n_examples < 1) throw ValidationError("score matrix: n_examples must be >= 1");
    for (double v : m.values) {
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("score matrix: value outside [0, 1]");
    }
}

HeadSet make_head_set(ModelGeometry g, std::span<const HeadId> members) {
    HeadSet s{g, {}};
    for (const auto& h : members) {
        if (!h.within(g)) {
            throw ValidationError("head (" + std::to_string(h.layer) + ", " + std::to_string(h.head) +
                                  ") outside geometry");
        }
        s.members.insert(h);
    }
    return s;
}

std::vector<Position> retrieved_positions(const ExampleTrace& trace, std::size_t head_flat,
                                          std::span<const TokenSpan> targets) {
    const TargetIndex ix = index_targets(trace, targets);
    std::vector<char> hit(ix.positions.size(), 0);
    for (const auto& s : trace.steps) {
        const Position p = s.argmax_positions[head_flat];
        if (p >= ix.slot.size()) continue;
        const auto k = ix.slot[p];
        if (k >= 0 && trace.context_token_ids[p] == s.generated_token_id) hit[k] = 1;
    }
    std::vector<Position> out;
    for (std::size_t k = 0; k < hit.size(); ++k) {
        if (hit[k]) out.push_back(ix.positions[k]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Position> retrieved_positions(const ExampleTrace& trace, const ModelGeometry& g, HeadId head,
                                          std::span<const TokenSpan> targets) {
    if (!head.within(g)) throw ValidationError("head outside geometry");
    return retrieved_positions(trace, head.flat(g), targets);
}

double retrieval_score(const ExampleTrace& trace, const ModelGeometry& g, HeadId head) {
    const TargetIndex ix = index_targets(trace, trace.answer_token_spans);
    require_targets(trace, ScoreKind::retrieval, ix.positions.size());
    const auto got = retrieved_positions(trace, g, head, trace.answer_token_spans);
    return static_cast<double>(got.size()) / static_cast<double>(ix.positions.size());
}

int insight_score(const ExampleTrace& trace, const ModelGeometry& g, HeadId head) {
    const TargetIndex ix = index_targets(trace, trace.needle_token_spans);
    require_targets(trace, ScoreKind::insight, ix.positions.size());
    return retrieved_positions(trace, g, head, trace.needle_token_spans).empty() ? 0 : 1;
}

std::vector<double> score_heads(const ExampleTrace& trace, const ModelGeometry& g, ScoreKind kind) {
    const TargetIndex ix = index_targets(trace, targets_for(trace, kind));
    const std::size_t t = ix.positions.size();
    require_targets(trace, kind, t);
    const std::size_t n_heads = g.size();
    std::vector<char> hit(n_heads * t, 0);
    for (const auto& s : trace.steps) {
        if (!ix.tokens.contains(s.generated_token_id)) continue;
        for (std::size_t h = 0; h < n_heads; ++h) {
            const Position p = s.argmax_positions[h];
            if (p >= ix.slot.size()) continue;
            const auto k = ix.slot[p];
            if (k >= 0 && trace.context_token_ids[p] == s.generated_token_id) hit[h * t + k] = 1;
        }
    }
    std::vector<double> out(n_heads, 0.0);
    for (std::size_t h = 0; h < n_heads; ++h) {
        std::size_t c = 0;
        for (std::size_t k = 0; k < t; ++k) c += hit[h * t + k] ? 1 : 0;
        if (kind == ScoreKind::retrieval) {
            out[h] = static_cast<double>(c) / static_cast<double>(t);
        } else {
            out[h] = c > 0 ? 1.0 : 0.0;
        }
    }
    return out;
}

ScoreAccumulator::ScoreAccumulator(const TraceHeader& header, ScoreKind kind)
    : header_(header), kind_(kind), sums_(header.n_layers * header.n_heads, 0.0) {}

void ScoreAccumulator::check_geometry(const ExampleTrace& trace) const {
    for (const auto& s : trace.steps) {
        if (s.argmax_positions.size() != sums_.size()) {
            throw ValidationError("trace '" + trace.example_id + "': geometry mismatch (" +
                                  std::to_string(s.argmax_positions.size()) + " positions for " +
                                  std::to_string(sums_.size()) + " heads)");
        }
    }
}

void ScoreAccumulator::add(const ExampleTrace& trace) {
    check_geometry(trace);
    const auto v = score_heads(trace, header_.geometry(), kind_);
    for (std::size_t h = 0; h < sums_.size(); ++h) sums_[h] += v[h];
    ++n_;
}

void ScoreAccumulator::add_batch(std::span<const ExampleTrace> traces) {
    for (const auto& t : traces) check_geometry(t);
    const std::size_t g = sums_.size();
    const auto n = static_cast<std::ptrdiff_t>(traces.size());
    std::vector<double> scratch(traces.size() * g);
    std::vector<std::exception_ptr> failures(traces.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            const auto v = score_heads(traces[i], header_.geometry(), kind_);
            std::copy(v.begin(), v.end(), scratch.begin() + i * static_cast<std::ptrdiff_t>(g));
        } catch (...) {
            failures[i] = std::current_exception();
        }
    }
    // Report the first failing trace, as the serial loop would.
    for (const auto& f : failures) {
        if (f) std::rethrow_exception(f);
    }
    // Fixed-order reduction keeps the result independent of the schedule.
    for (std::size_t i = 0; i < traces.size(); ++i) {
        for (std::size_t h = 0; h < g; ++h) sums_[h] += scratch[i * g + h];
    }
    n_ += traces.size();
}

ScoreMatrix ScoreAccumulator::finish() const {
    if (n_ == 0) throw ValidationError("cannot aggregate zero traces");
    ScoreMatrix m;
    m.geometry = header_.geometry();
    m.kind = kind_;
    m.dataset_id = header_.dataset_id;
    m.model_id = header_.model_id;
    m.n_examples = n_;
    m.values.resize(sums_.size());
    for (std::size_t h = 0; h < sums_.size(); ++h) m.values[h] = sums_[h] / static_cast<double>(n_);
    return m;
}

ScoreMatrix aggregate(const TraceHeader& header, std::span<const ExampleTrace> traces, ScoreKind kind) {
    ScoreAccumulator acc(header, kind);
    acc.add_batch(traces);
    return acc.finish();
}

ScoreMatrix aggregate_serial(const TraceHeader& header, std::span<const ExampleTrace> traces, ScoreKind kind) {
    ScoreAccumulator acc(header, kind);
    for (const auto& t : traces) acc.add(t);
    return acc.finish();
}

ScoreMatrix aggregate_file(const std::filesystem::path& trace_path, ScoreKind kind, std::size_t chunk) {
    if (chunk == 0) chunk = 1;
    TraceReader reader(trace_path);
    ScoreAccumulator acc(reader.header(), kind);
    std::vector<ExampleTrace> batch;
    batch.reserve(chunk);
    while (auto t = reader.next()) {
        batch.push_back(std::move(*t));
        if (batch.size() == chunk) {
            acc.add_batch(batch);
            batch.clear();
        }
    }
    if (!batch.empty()) acc.add_batch(batch);
    return acc.finish();
}

HeadSet head_set(const ScoreMatrix& m) {
    HeadSet s{m.geometry, {}};
    for (std::size_t i = 0; i < m.values.size(); ++i) {
        if (m.values[i] > 0.0) s.members.insert(HeadId::from_flat(i, m.geometry));
    }
    return s;
}

std::string serialize_score_matrix(const ScoreMatrix& m) {
    check_score_matrix(m);
    ordered_json j;
    j["format"] = "synthctx-scores";
    j["kind"] = to_string(m.kind);
    j["model_id"] = m.model_id;
    j["dataset_id"] = m.dataset_id;
    j["n_layers"] = m.geometry.n_layers;
    j["n_heads"] = m.geometry.n_heads;
    j["n_examples"] = m.n_examples;
    j["source_sha256"] = m.source_sha256;
    j["values"] = m.values;
    return dump_line(j) + "\n";
}

ScoreMatrix parse_score_matrix(std::string_view content) {
    ScoreMatrix m;
    try {
        const json j = json::parse(content);
        for (auto it = j.begin(); it != j.end(); ++it) {
            static const std::set<std::string> known = {"format",   "kind",    "model_id",   "dataset_id",    "n_layers",
                                                        "n_heads",  "n_examples", "source_sha256", "values"};
            if (!known.contains(it.key())) throw ParseError("score matrix: unknown field '" + it.key() + "'");
        }
        if (j.at("format").get<std::string>() != "synthctx-scores") throw ParseError("not a score matrix file");
        m.kind = parse_score_kind(j.at("kind").get<std::string>());
        m.model_id = j.at("model_id").get<std::string>();
        m.dataset_id = j.at("dataset_id").get<std::string>();
        m.geometry = {j.at("n_layers").get<std::size_t>(), j.at("n_heads").get<std::size_t>()};
        m.n_examples = j.at("n_examples").get<std::size_t>();
        if (j.contains("source_sha256")) m.source_sha256 = j["source_sha256"].get<std::string>();
        m.values = j.at("values").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("score matrix: ") + e.what());
    }
    check_score_matrix(m);
    return m;
}

void write_score_matrix(const std::filesystem::path& path, const ScoreMatrix& m) {
    write_file(path, serialize_score_matrix(m));
}

ScoreMatrix read_score_matrix(const std::filesystem::path& path) {
    try {
        return parse_score_matrix(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

}  // namespace synthctx
