#include "synthctx/core.hpp"

#include <cstdio>

#include "synthctx/error.hpp"

namespace synthctx {

std::string_view to_string(Task t) noexcept {
    switch (t) {
        case Task::mdqa: return "mdqa";
        case Task::musique: return "musique";
        case Task::summhay_cite: return "summhay-cite";
    }
    return "?";
}

std::string_view to_string(ConceptExpression c) noexcept {
    switch (c) {
        case ConceptExpression::high: return "high";
        case ConceptExpression::low: return "low";
        case ConceptExpression::simplified: return "simplified";
        case ConceptExpression::symbolic: return "symbolic";
    }
    return "?";
}

std::string_view to_string(ContextDiversity d) noexcept {
    switch (d) {
        case ContextDiversity::high: return "high";
        case ContextDiversity::low: return "low";
        case ContextDiversity::symbolic: return "symbolic";
    }
    return "?";
}

std::string_view to_string(TokenizerMode m) noexcept {
    switch (m) {
        case TokenizerMode::whitespace_approx: return "whitespace-approx";
        case TokenizerMode::byte_count: return "byte-count";
        case TokenizerMode::external_vocab: return "external-vocab";
    }
    return "?";
}

Task parse_task(std::string_view s) {
    if (s == "mdqa") return Task::mdqa;
    if (s == "musique") return Task::musique;
    if (s == "summhay-cite") return Task::summhay_cite;
    throw ValidationError("unknown task '" + std::string(s) + "'");
}

ConceptExpression parse_concept_expression(std::string_view s) {
    if (s == "high") return ConceptExpression::high;
    if (s == "low") return ConceptExpression::low;
    if (s == "simplified") return ConceptExpression::simplified;
    if (s == "symbolic") return ConceptExpression::symbolic;
    throw ValidationError("unknown concept_expression '" + std::string(s) + "'");
}

ContextDiversity parse_context_diversity(std::string_view s) {
    if (s == "high") return ContextDiversity::high;
    if (s == "low") return ContextDiversity::low;
    if (s == "symbolic") return ContextDiversity::symbolic;
    throw ValidationError("unknown context_diversity '" + std::string(s) + "'");
}

TokenizerMode parse_tokenizer_mode(std::string_view s) {
    if (s == "whitespace-approx") return TokenizerMode::whitespace_approx;
    if (s == "byte-count") return TokenizerMode::byte_count;
    if (s == "external-vocab") return TokenizerMode::external_vocab;
    throw ValidationError("unknown tokenizer mode '" + std::string(s) + "'");
}

void check_variant(Task task, const Variant& v) {
    const bool sym_c = v.concept_expression == ConceptExpression::symbolic;
    const bool sym_d = v.context_diversity == ContextDiversity::symbolic;
    if (sym_c != sym_d) {
        throw ValidationError("symbolic concept expression and symbolic context diversity go together");
    }
    if (sym_c) return;
    const auto c = v.concept_expression;
    if (task == Task::summhay_cite) {
        if (c == ConceptExpression::low) {
            throw ValidationError("summhay-cite uses 'simplified' rather than 'low' concept expression");
        }
    } else if (c == ConceptExpression::simplified) {
        throw ValidationError("'simplified' concept expression is only defined for summhay-cite");
    }
}

void check_tokenizer_spec(const TokenizerSpec& spec) {
    const bool external = spec.mode == TokenizerMode::external_vocab;
    if (external && !spec.vocab_ref) throw ConfigError("external-vocab tokenizer requires vocab_ref");
    if (!external && spec.vocab_ref) {
        throw ConfigError(std::string(to_string(spec.mode)) + " tokenizer must not carry vocab_ref");
    }
    if (!(spec.calibration > 0.0)) throw ConfigError("tokenizer calibration must be positive");
}

void check_manifest(const DatasetManifest& m) {
    if (m.count < 1) throw ValidationError("manifest count must be >= 1");
    if (m.token_budget < 256) throw ValidationError("manifest token_budget must be >= 256");
    if (m.dataset_id.empty()) throw ValidationError("manifest dataset_id is empty");
    check_variant(m.task, m.variant);
    check_tokenizer_spec(m.tokenizer);
}

const Document* Example::find_document(std::uint64_t doc_id) const noexcept {
    for (const auto& d : documents) {
        if (d.doc_id == doc_id) return &d;
    }
    return nullptr;
}

std::string make_example_id(std::string_view dataset_id, std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06zu", index);
    std::string id(dataset_id);
    id += '/';
    id += buf;
    return id;
}

int exit_code_for(const std::exception& e) noexcept {
    if (dynamic_cast<const IoError*>(&e)) return 2;
    if (dynamic_cast<const BackendError*>(&e) || dynamic_cast<const CacheMissError*>(&e)) return 3;
    return 1;
}

}  // namespace synthctx
