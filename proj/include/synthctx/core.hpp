#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace synthctx {

enum class Task { mdqa, musique, summhay_cite };
enum class ConceptExpression { high, low, simplified, symbolic };
enum class ContextDiversity { high, low, symbolic };

std::string_view to_string(Task t) noexcept;
std::string_view to_string(ConceptExpression c) noexcept;
std::string_view to_string(ContextDiversity d) noexcept;

// Parsers throw ValidationError on unknown names.
Task parse_task(std::string_view s);
ConceptExpression parse_concept_expression(std::string_view s);
ContextDiversity parse_context_diversity(std::string_view s);

struct Variant {
    ConceptExpression concept_expression = ConceptExpression::symbolic;
    ContextDiversity context_diversity = ContextDiversity::symbolic;

    bool symbolic() const noexcept {
        return concept_expression == ConceptExpression::symbolic &&
               context_diversity == ContextDiversity::symbolic;
    }
    friend bool operator==(const Variant&, const Variant&) = default;
};

// Throws ValidationError for combinations the generators do not define
// (e.g. simplified expression outside summhay-cite, half-symbolic variants).
void check_variant(Task task, const Variant& v);

struct Document {
    std::uint64_t doc_id = 0;
    std::optional<std::string> title;
    std::string body;

    friend bool operator==(const Document&, const Document&) = default;
};

// Byte offsets into the UTF-8 body of document `doc_id`, end exclusive.
struct NeedleSpan {
    std::uint64_t doc_id = 0;
    std::size_t char_start = 0;
    std::size_t char_end = 0;
    std::size_t needle_index = 0;

    friend bool operator==(const NeedleSpan&, const NeedleSpan&) = default;
};

struct Example {
    std::string example_id;
    Task task = Task::mdqa;
    Variant variant;
    std::vector<Document> documents;
    std::string query;
    std::string gold_answer;
    std::vector<NeedleSpan> needles;
    std::uint64_t seed = 0;

    const Document* find_document(std::uint64_t doc_id) const noexcept;
    friend bool operator==(const Example&, const Example&) = default;
};

enum class TokenizerMode { whitespace_approx, byte_count, external_vocab };

std::string_view to_string(TokenizerMode m) noexcept;
TokenizerMode parse_tokenizer_mode(std::string_view s);

struct TokenizerSpec {
    TokenizerMode mode = TokenizerMode::whitespace_approx;
    // Content hash (sha256 hex) of the external vocabulary file.
    std::optional<std::string> vocab_ref;
    // Multiplier applied to whitespace-approx run counts (rounded up).
    double calibration = 1.0;

    friend bool operator==(const TokenizerSpec&, const TokenizerSpec&) = default;
};

// Throws ConfigError when vocab_ref presence disagrees with the mode.
void check_tokenizer_spec(const TokenizerSpec& spec);

struct PromptProvenance {
    std::string template_id;
    std::string backend_id;

    friend bool operator==(const PromptProvenance&, const PromptProvenance&) = default;
    friend auto operator<=>(const PromptProvenance&, const PromptProvenance&) = default;
};

struct DatasetManifest {
    std::string dataset_id;
    Task task = Task::mdqa;
    Variant variant;
    std::size_t count = 1;
    std::uint64_t master_seed = 0;
    std::size_t token_budget = 4096;
    TokenizerSpec tokenizer;
    std::string tool_version;
    std::string created_at;
    std::optional<std::vector<PromptProvenance>> prompt_provenance;

    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

void check_manifest(const DatasetManifest& m);

struct ModelGeometry {
    std::size_t n_layers = 0;
    std::size_t n_heads = 0;

    std::size_t size() const noexcept { return n_layers * n_heads; }
    friend bool operator==(const ModelGeometry&, const ModelGeometry&) = default;
};

struct HeadId {
    std::size_t layer = 0;
    std::size_t head = 0;

    // Position in the canonical layer-major flattening.
    std::size_t flat(const ModelGeometry& g) const noexcept { return layer * g.n_heads + head; }
    static HeadId from_flat(std::size_t index, const ModelGeometry& g) noexcept {
        return {index / g.n_heads, index % g.n_heads};
    }
    bool within(const ModelGeometry& g) const noexcept {
        return layer < g.n_layers && head < g.n_heads;
    }

    friend bool operator==(const HeadId&, const HeadId&) = default;
    friend auto operator<=>(const HeadId&, const HeadId&) = default;
};

// dataset_id + "/" + zero-padded index (6 digits minimum).
std::string make_example_id(std::string_view dataset_id, std::size_t index);

inline constexpr std::string_view kToolVersion = "synthctx 0.3.0";

}  // namespace synthctx
