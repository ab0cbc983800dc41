#include "synthctx/templates.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>

#include "synthctx/error.hpp"
#include "synthctx/rng.hpp"

namespace synthctx::templates {

namespace {

struct Range {
    std::size_t start;
    std::size_t end;
    std::size_t entity;
};

// Longest-first claiming over `entities`; returns non-overlapping ranges
// sorted by start.
std::vector<Range> claim_ranges(std::string_view text, const std::vector<std::string_view>& entities) {
    std::vector<std::size_t> order(entities.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (entities[a].size() != entities[b].size()) return entities[a].size() > entities[b].size();
        return entities[a] < entities[b];
    });

    std::map<std::size_t, std::size_t> claimed;  // start -> end
    auto overlaps = [&](std::size_t s, std::size_t e) {
        auto it = claimed.upper_bound(s);
        if (it != claimed.end() && it->first < e) return true;
        if (it != claimed.begin()) {
            --it;
            if (it->second > s) return true;
        }
        return false;
    };

    std::vector<Range> ranges;
    for (std::size_t idx : order) {
        const auto ent = entities[idx];
        if (ent.empty()) continue;
        std::size_t pos = text.find(ent);
        while (pos != std::string_view::npos) {
            if (!overlaps(pos, pos + ent.size())) {
                claimed.emplace(pos, pos + ent.size());
                ranges.push_back({pos, pos + ent.size(), idx});
                pos = text.find(ent, pos + ent.size());
            } else {
                pos = text.find(ent, pos + 1);
            }
        }
    }
    std::sort(ranges.begin(), ranges.end(), [](const Range& a, const Range& b) { return a.start < b.start; });
    return ranges;
}

std::string rebuild(std::string_view text, const std::vector<Range>& ranges,
                    const std::vector<std::string_view>& replacements) {
    std::string out;
    std::size_t cursor = 0;
    for (const auto& r : ranges) {
        out.append(text.substr(cursor, r.start - cursor));
        out.append(replacements[r.entity]);
        cursor = r.end;
    }
    out.append(text.substr(cursor));
    return out;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

}  // namespace

const std::string* EntityMap::find(std::string_view entity) const noexcept {
    for (const auto& [k, v] : entries) {
        if (k == entity) return &v;
    }
    return nullptr;
}

SymbolizedText symbolize_entities(std::string_view text, std::span<const std::string> entities,
                                  std::uint64_t seed, std::string_view alphabet) {
    if (entities.empty()) throw ValidationError("symbolize_entities needs at least one entity");
    SymbolizedText out;
    Rng rng(seed);
    symbolic::AtomPool atoms(rng, alphabet);
    for (const auto& e : entities) {
        if (e.empty()) throw ValidationError("symbolize_entities: empty entity");
        if (text.find(e) == std::string_view::npos) throw MissingEntityError("entity '" + e + "' not found in text");
        if (!out.map.find(e)) out.map.entries.emplace_back(e, atoms.fresh());
    }
    out.text = apply_entity_map(text, out.map);
    return out;
}

std::string apply_entity_map(std::string_view text, const EntityMap& map) {
    std::vector<std::string_view> ents;
    std::vector<std::string_view> atoms;
    for (const auto& [k, v] : map.entries) {
        ents.emplace_back(k);
        atoms.emplace_back(v);
    }
    return rebuild(text, claim_ranges(text, ents), atoms);
}

std::string render_needle_template(const KnowledgeTriple& t) {
    return "The " + t.relation + " of " + t.subject + " is " + t.object + ".";
}

std::vector<Document> pad_haystack(std::span<const Document> core_docs, std::size_t budget,
                                   const PaddingSpec& spec, const TokenCounter& counter) {
    if (spec.text.empty()) throw ConfigError("padding text is empty");
    if (spec.units_per_document < 1) throw ConfigError("units_per_document must be >= 1");

    const std::size_t core = context_token_count(core_docs, counter);
    if (core > budget) {
        throw BudgetError("core documents use " + std::to_string(core) + " tokens, over the budget of " +
                              std::to_string(budget),
                          core - budget);
    }
    std::vector<Document> out(core_docs.begin(), core_docs.end());
    std::uint64_t next_id = 0;
    for (const auto& d : core_docs) next_id = std::max(next_id, d.doc_id + 1);

    std::size_t remaining = budget - core;
    const std::size_t fresh_cost = counter.count(spec.text);
    if (fresh_cost == 0) throw ConfigError("padding unit has zero token cost");

    Document* open = nullptr;
    std::size_t open_units = 0;
    std::size_t open_cost = 0;
    for (;;) {
        if (open && open_units < spec.units_per_document) {
            std::string grown = open->body + " " + spec.text;
            const std::size_t grown_cost = counter.count(grown);
            if (grown_cost - open_cost <= remaining) {
                remaining -= grown_cost - open_cost;
                open->body = std::move(grown);
                open_cost = grown_cost;
                ++open_units;
                continue;
            }
        }
        if (fresh_cost > remaining) break;
        out.push_back({next_id++, std::nullopt, spec.text});
        open = &out.back();
        open_units = 1;
        open_cost = fresh_cost;
        remaining -= fresh_cost;
    }
    return out;
}

ContextFragment assemble_context(const ContextFragment& needle_docs, std::span<const Document> filler_docs,
                                 std::uint64_t seed, std::size_t budget, const TokenCounter& counter) {
    const std::size_t needle_cost = context_token_count(needle_docs.documents, counter);
    if (needle_cost > budget) {
        throw BudgetError("needle documents use " + std::to_string(needle_cost) +
                              " tokens, over the budget of " + std::to_string(budget),
                          needle_cost - budget);
    }
    std::vector<const Document*> fillers;
    std::size_t used = needle_cost;
    for (const auto& f : filler_docs) {
        const std::size_t c = counter.count(f.body);
        if (used + c > budget) continue;
        used += c;
        fillers.push_back(&f);
    }

    Rng rng(seed);
    const std::size_t k = needle_docs.documents.size();
    const std::size_t n = k + fillers.size();
    // slots[i] = needle index placed at final position i, or npos for a filler.
    std::vector<std::size_t> slots(n, SIZE_MAX);
    const auto positions = rng.sample_indices(n, k);
    for (std::size_t i = 0; i < k; ++i) slots[positions[i]] = i;

    ContextFragment out;
    std::map<std::uint64_t, std::uint64_t> remap;
    std::size_t next_filler = 0;
    for (std::size_t pos = 0; pos < n; ++pos) {
        Document d;
        if (slots[pos] != SIZE_MAX) {
            d = needle_docs.documents[slots[pos]];
            remap[d.doc_id] = pos;
        } else {
            d = *fillers[next_filler++];
        }
        d.doc_id = pos;
        out.documents.push_back(std::move(d));
    }
    for (auto span : needle_docs.needles) {
        auto it = remap.find(span.doc_id);
        if (it == remap.end()) throw ValidationError("needle span names a document outside the needle set");
        span.doc_id = it->second;
        out.needles.push_back(span);
    }
    return out;
}

bool is_split_conjunction(std::string_view w) noexcept {
    return w == "and" || w == "but" || w == "or" || w == "nor" || w == "yet" || w == "so" || w == "whereas";
}

std::vector<std::string> rule_split_insight(std::string_view sentence) {
    std::vector<std::string> words;
    {
        std::size_t i = 0;
        while (i < sentence.size()) {
            while (i < sentence.size() && std::isspace(static_cast<unsigned char>(sentence[i]))) ++i;
            std::size_t j = i;
            while (j < sentence.size() && !std::isspace(static_cast<unsigned char>(sentence[j]))) ++j;
            if (j > i) words.emplace_back(sentence.substr(i, j - i));
            i = j;
        }
    }

    auto finish = [](std::vector<std::string>& frag, std::vector<std::string>& out) {
        if (frag.empty()) return;
        std::string s;
        for (const auto& w : frag) {
            if (!s.empty()) s += ' ';
            s += w;
        }
        while (!s.empty() && (s.back() == '.' || s.back() == ',' || s.back() == ';' || s.back() == ':' ||
                              s.back() == '!' || s.back() == '?')) {
            s.pop_back();
        }
        frag.clear();
        if (s.empty()) return;
        s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
        s += '.';
        out.push_back(std::move(s));
    };

    std::vector<std::string> out;
    std::vector<std::string> frag;
    int depth = 0;
    bool in_quote = false;
    for (std::size_t i = 0; i < words.size(); ++i) {
        const std::string& w = words[i];
        const bool top = depth == 0 && !in_quote;
        if (top && is_split_conjunction(lower(w)) && !frag.empty()) {
            const bool after_comma = frag.back().back() == ',';
            const std::size_t rest = words.size() - i - 1;
            if ((after_comma && rest >= 1) || (frag.size() >= 2 && rest >= 2)) {
                finish(frag, out);
                continue;
            }
        }
        for (char c : w) {
            if (c == '(') ++depth;
            if (c == ')' && depth > 0) --depth;
            if (c == '"') in_quote = !in_quote;
        }
        frag.push_back(w);
        if (depth == 0 && !in_quote && w.back() == ';') finish(frag, out);
    }
    finish(frag, out);
    if (out.empty() && !words.empty()) out.emplace_back(sentence);
    return out;
}

}  // namespace synthctx::templates
