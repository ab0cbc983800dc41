#pragma once

#include <cstddef>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "synthctx/core.hpp"
#include "synthctx/trace.hpp"

// Per-head retrieval and insight scores over attention traces.
namespace synthctx {

enum class ScoreKind { retrieval, insight };

std::string_view to_string(ScoreKind k) noexcept;
ScoreKind parse_score_kind(std::string_view s);

struct ScoreMatrix {
    ModelGeometry geometry;
    std::vector<double> values;  // layer-major, size() == geometry.size()
    ScoreKind kind = ScoreKind::retrieval;
    std::string dataset_id;
    std::string model_id;
    std::size_t n_examples = 0;
    std::string source_sha256;  // of the trace file, when known

    double at(HeadId h) const noexcept { return values[h.flat(geometry)]; }
    double at(std::size_t layer, std::size_t head) const noexcept { return values[layer * geometry.n_heads + head]; }
    friend bool operator==(const ScoreMatrix&, const ScoreMatrix&) = default;
};

// Throws ValidationError on shape, range or count problems.
void check_score_matrix(const ScoreMatrix& m);

struct HeadSet {
    ModelGeometry geometry;
    std::set<HeadId> members;

    std::size_t size() const noexcept { return members.size(); }
    bool empty() const noexcept { return members.empty(); }
    bool contains(HeadId h) const { return members.contains(h); }
    friend bool operator==(const HeadSet&, const HeadSet&) = default;
};

// Throws ValidationError when a member lies outside the geometry.
HeadSet make_head_set(ModelGeometry g, std::span<const HeadId> members);

// Context positions p inside `targets` such that at some step the head's
// argmax is p and context_token_ids[p] equals that step's generated token.
// Sorted ascending.
std::vector<Position> retrieved_positions(const ExampleTrace& trace, std::size_t head_flat,
                                          std::span<const TokenSpan> targets);
std::vector<Position> retrieved_positions(const ExampleTrace& trace, const ModelGeometry& g, HeadId head,
                                          std::span<const TokenSpan> targets);

// |retrieved answer positions| / |answer positions|, spans pooled.
// UndefinedMetricError when there are no answer positions.
double retrieval_score(const ExampleTrace& trace, const ModelGeometry& g, HeadId head);
// 1 when any needle position is retrieved. UndefinedMetricError without
// needle positions.
int insight_score(const ExampleTrace& trace, const ModelGeometry& g, HeadId head);

// Scores of every head for one trace, layer-major.
std::vector<double> score_heads(const ExampleTrace& trace, const ModelGeometry& g, ScoreKind kind);

// Running per-head sums. Scores are summed in the order traces are added,
// so a parallel batch and a serial loop over the same traces give
// bit-identical matrices.
class ScoreAccumulator {
  public:
    ScoreAccumulator(const TraceHeader& header, ScoreKind kind);

    void add(const ExampleTrace& trace);
    // Scores the batch with OpenMP, then adds in batch order.
    void add_batch(std::span<const ExampleTrace> traces);

    std::size_t count() const noexcept { return n_; }
    // Throws ValidationError when nothing was added.
    ScoreMatrix finish() const;

  private:
    void check_geometry(const ExampleTrace& trace) const;

    TraceHeader header_;
    ScoreKind kind_;
    std::vector<double> sums_;
    std::size_t n_ = 0;
};

// Mean per-head score over traces. The default kernel is OpenMP-parallel;
// aggregate_serial is the plain loop kept as its reference.
ScoreMatrix aggregate(const TraceHeader& header, std::span<const ExampleTrace> traces, ScoreKind kind);
ScoreMatrix aggregate_serial(const TraceHeader& header, std::span<const ExampleTrace> traces, ScoreKind kind);

// Streams a trace file through the accumulator, `chunk` records at a time.
ScoreMatrix aggregate_file(const std::filesystem::path& trace_path, ScoreKind kind, std::size_t chunk = 256);

// { h : value > 0 }.
HeadSet head_set(const ScoreMatrix& m);

// Score matrix file: a single JSON object with geometry, kind, ids and the
// layer-major value array.
std::string serialize_score_matrix(const ScoreMatrix& m);
ScoreMatrix parse_score_matrix(std::string_view content);
void write_score_matrix(const std::filesystem::path& path, const ScoreMatrix& m);
ScoreMatrix read_score_matrix(const std::filesystem::path& path);

}  // namespace synthctx
