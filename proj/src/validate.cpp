#include "synthctx/validate.hpp"

#include <algorithm>
#include <set>

#include "synthctx/error.hpp"
#include "synthctx/symbolic.hpp"

namespace synthctx {

namespace {

std::size_t query_hops(const std::string& query) {
    std::size_t hops = 0;
    for (std::size_t pos = query.find(" of "); pos != std::string::npos; pos = query.find(" of ", pos + 1)) {
        ++hops;
    }
    return hops;
}

}  // namespace

std::vector<Violation> validate_example(const Example& ex, const ValidationLimits& limits) {
    std::vector<Violation> out;
    auto add = [&](std::string code, std::string detail) { out.push_back({std::move(code), std::move(detail)}); };

    try {
        check_variant(ex.task, ex.variant);
    } catch (const ValidationError& e) {
        add("variant", e.what());
    }

    if (ex.documents.empty()) add("no-documents", "example has no documents");
    std::set<std::uint64_t> ids;
    for (const auto& d : ex.documents) {
        if (d.body.empty()) add("empty-body", "document " + std::to_string(d.doc_id) + " has an empty body");
        if (!ids.insert(d.doc_id).second) add("duplicate-doc-id", "doc_id " + std::to_string(d.doc_id) + " repeats");
    }

    std::vector<const NeedleSpan*> in_bounds;
    for (const auto& n : ex.needles) {
        const Document* doc = ex.find_document(n.doc_id);
        if (!doc) {
            add("unknown-doc", "needle " + std::to_string(n.needle_index) + " names missing doc_id " +
                                   std::to_string(n.doc_id));
            continue;
        }
        if (!(n.char_start < n.char_end && n.char_end <= doc->body.size())) {
            add("span-out-of-bounds", "needle " + std::to_string(n.needle_index) + " span [" +
                                          std::to_string(n.char_start) + ", " + std::to_string(n.char_end) +
                                          ") outside body of length " + std::to_string(doc->body.size()));
            continue;
        }
        in_bounds.push_back(&n);
    }
    std::sort(in_bounds.begin(), in_bounds.end(), [](const NeedleSpan* a, const NeedleSpan* b) {
        return a->doc_id != b->doc_id ? a->doc_id < b->doc_id : a->char_start < b->char_start;
    });
    for (std::size_t i = 1; i < in_bounds.size(); ++i) {
        if (in_bounds[i]->doc_id == in_bounds[i - 1]->doc_id && in_bounds[i]->char_start < in_bounds[i - 1]->char_end) {
            add("span-overlap", "needles " + std::to_string(in_bounds[i - 1]->needle_index) + " and " +
                                    std::to_string(in_bounds[i]->needle_index) + " overlap");
        }
    }

    if (ex.needles.empty()) add("no-needles", "example carries no needle spans");

    if (ex.task == Task::musique) {
        std::optional<std::size_t> hops = limits.hops;
        if (!hops && ex.variant.symbolic()) hops = query_hops(ex.query);
        std::set<std::size_t> indices;
        for (const auto& n : ex.needles) indices.insert(n.needle_index);
        if (hops && (ex.needles.size() != *hops || indices.size() != *hops)) {
            add("hop-count", "musique example carries " + std::to_string(ex.needles.size()) +
                                 " needles for " + std::to_string(*hops) + " hops");
        }
    }
    if (ex.task == Task::summhay_cite) {
        std::set<std::uint64_t> docs;
        for (const auto& n : ex.needles) docs.insert(n.doc_id);
        if (ex.needles.size() < 2 || docs.size() != 2) {
            add("citation-docs", "summhay-cite needs >= 2 needles across exactly 2 documents (got " +
                                     std::to_string(ex.needles.size()) + " across " +
                                     std::to_string(docs.size()) + ")");
        }
    }

    if (limits.token_budget) {
        try {
            const std::size_t used = context_token_count(ex.documents, limits.counter);
            if (used > *limits.token_budget) {
                add("over-budget", "context uses " + std::to_string(used) + " tokens of " +
                                       std::to_string(*limits.token_budget));
            }
        } catch (const Error& e) {
            add("token-count", e.what());
        }
    }

    if (ex.variant.symbolic()) {
        try {
            const std::string derived = symbolic::oracle_answer(ex);
            if (derived != ex.gold_answer) {
                add("oracle-mismatch", "stored answer '" + ex.gold_answer + "' but oracle derives '" + derived + "'");
            }
        } catch (const Error& e) {
            add("oracle-error", e.what());
        }
    }
    return out;
}

}  // namespace synthctx
