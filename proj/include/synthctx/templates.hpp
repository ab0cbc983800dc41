#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "synthctx/core.hpp"
#include "synthctx/symbolic.hpp"
#include "synthctx/tokenizer.hpp"

// Templated (non-LLM) construction: entity symbolization, needle sentence
// templates, repeated-text padding and seeded context assembly.
namespace synthctx::templates {

// Low-diversity padding block, used verbatim and only as a whole unit.
inline constexpr std::string_view kPaddingBlock =
    "The grass is green. The sky is blue. The sun is yellow. Here we go. There and back again.";

struct KnowledgeTriple {
    std::string subject;
    std::string relation;
    std::string object;
    std::size_t hop_index = 0;
};

// Original entity text -> atom, in first-seen order. Injective.
struct EntityMap {
    std::vector<std::pair<std::string, std::string>> entries;

    const std::string* find(std::string_view entity) const noexcept;
    std::size_t size() const noexcept { return entries.size(); }
};

struct SymbolizedText {
    std::string text;
    EntityMap map;
};

// Replaces every occurrence of each entity with its atom. Longer entities
// claim text first; shorter ones only match outside already-claimed ranges.
// Throws MissingEntityError when an entity does not occur in `text`.
SymbolizedText symbolize_entities(std::string_view text, std::span<const std::string> entities,
                                  std::uint64_t seed,
                                  std::string_view alphabet = symbolic::kDefaultAlphabet);

// Same longest-first replacement with an existing map; absent entities are
// simply left alone.
std::string apply_entity_map(std::string_view text, const EntityMap& map);

// "The {relation} of {subject} is {object}."
std::string render_needle_template(const KnowledgeTriple& t);

struct PaddingSpec {
    std::string text{kPaddingBlock};
    // Units joined by one space inside a padding document.
    std::size_t units_per_document = 16;
};

// Returns core_docs followed by padding documents made of whole units, added
// until one more unit would overflow the budget. Padding doc_ids continue
// after the largest core doc_id. Throws BudgetError when the core alone is
// over budget.
std::vector<Document> pad_haystack(std::span<const Document> core_docs, std::size_t budget,
                                   const PaddingSpec& spec, const TokenCounter& counter);

struct ContextFragment {
    std::vector<Document> documents;
    std::vector<NeedleSpan> needles;
};

// Places the needle documents at seeded uniform-random slots among the
// fillers (kept in their given order, skipping any that would overflow the
// budget) and renumbers doc_ids 0..n-1, re-targeting the needle spans.
ContextFragment assemble_context(const ContextFragment& needle_docs, std::span<const Document> filler_docs,
                                 std::uint64_t seed, std::size_t budget, const TokenCounter& counter);

// Offline stand-in for LLM sentence splitting. Splits at top-level
// semicolons and coordinating conjunctions; a conjunction splits when it
// follows a comma or when both sides have at least two words.
std::vector<std::string> rule_split_insight(std::string_view sentence);

bool is_split_conjunction(std::string_view lowercase_word) noexcept;

}  // namespace synthctx::templates
