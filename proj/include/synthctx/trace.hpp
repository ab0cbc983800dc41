#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "synthctx/core.hpp"
#include "synthctx/validate.hpp"

// Attention-trace interchange format. See docs/trace-format.md for the exact
// byte layout; this header is the only code that reads or writes it.
namespace synthctx {

inline constexpr std::string_view kTraceFormat = "synthctx-trace";
inline constexpr int kTraceVersion = 1;

enum class Decoding { greedy };

std::string_view to_string(Decoding d) noexcept;

struct TraceHeader {
    std::string model_id;
    std::size_t n_layers = 0;
    std::size_t n_heads = 0;
    std::string tokenizer_hash;
    std::string dataset_id;
    Decoding decoding = Decoding::greedy;

    ModelGeometry geometry() const noexcept { return {n_layers, n_heads}; }
    friend bool operator==(const TraceHeader&, const TraceHeader&) = default;
};

using TokenId = std::int64_t;
using Position = std::uint32_t;

struct StepRecord {
    std::size_t step = 0;
    TokenId generated_token_id = 0;
    // One context position per head, layer-major.
    std::vector<Position> argmax_positions;

    friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

// Half-open [start, end) range of context positions.
struct TokenSpan {
    Position start = 0;
    Position end = 0;

    std::size_t size() const noexcept { return end - start; }
    friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

struct ExampleTrace {
    std::string example_id;
    std::vector<TokenId> context_token_ids;
    std::vector<TokenSpan> answer_token_spans;
    std::vector<TokenSpan> needle_token_spans;
    std::vector<StepRecord> steps;
    std::string prediction_text;

    friend bool operator==(const ExampleTrace&, const ExampleTrace&) = default;
};

// Violation codes name the offending field. Empty result = valid.
std::vector<Violation> validate_header(const TraceHeader& header);
std::vector<Violation> validate_trace(const TraceHeader& header, const ExampleTrace& trace);

std::string serialize_header(const TraceHeader& header);
std::string serialize_trace(const ExampleTrace& trace);

// Writes the header line on construction, then one line per trace. Every
// trace is validated before any of its bytes are written (ValidationError).
class TraceWriter {
  public:
    TraceWriter(std::ostream& out, TraceHeader header);

    std::size_t write(const ExampleTrace& trace);
    std::size_t bytes_written() const noexcept { return bytes_; }
    const TraceHeader& header() const noexcept { return header_; }

  private:
    std::ostream& out_;
    TraceHeader header_;
    std::size_t bytes_ = 0;
};

std::size_t write_traces(const TraceHeader& header, std::span<const ExampleTrace> traces, std::ostream& out);
std::size_t write_traces(const TraceHeader& header, std::span<const ExampleTrace> traces,
                         const std::filesystem::path& path);

// Single-pass streaming reader: holds one record at a time. Throws
// TraceFormatError(record, field) on malformed or invalid records; record 0 is
// the header line.
class TraceReader {
  public:
    explicit TraceReader(std::istream& in);
    explicit TraceReader(const std::filesystem::path& path);

    const TraceHeader& header() const noexcept { return header_; }
    std::optional<ExampleTrace> next();
    // Index of the record most recently returned by next().
    std::size_t record_index() const noexcept { return record_; }

  private:
    void read_header();

    std::ifstream file_;
    std::istream* in_;
    TraceHeader header_;
    std::size_t record_ = 0;
};

struct TraceFile {
    TraceHeader header;
    std::vector<ExampleTrace> traces;
};

// Convenience for small files and tests.
TraceFile read_traces(const std::filesystem::path& path);
TraceFile parse_traces(std::istream& in);

}  // namespace synthctx
