#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "synthctx/core.hpp"
#include "synthctx/rng.hpp"
#include "synthctx/tokenizer.hpp"

// Fully symbolic tasks (key-value lookup, chained dictionaries, list
// citation) and a brute-force answer oracle that works from the rendered
// documents alone.
//
// Rendering, fixed for every generator:
//   key-value       one document, one "key: value" line per pair
//   chained-dict    one document per dictionary: "Dictionary <id>:" then
//                   one "property: value" line per entry
//   list-citation   one document per list (doc_id = list id), atoms
//                   separated by single spaces
namespace synthctx::symbolic {

inline constexpr std::string_view kDefaultAlphabet = "abcdefghijklmnopqrstuvwxyz0123456789";
inline constexpr std::size_t kAtomLength = 4;

bool is_atom(std::string_view s, std::string_view alphabet = kDefaultAlphabet) noexcept;

// 32 neutral property nouns used as chained-dictionary keys.
const std::array<std::string_view, 32>& property_vocabulary() noexcept;

// Draws 4-character atoms that are distinct from everything drawn or
// reserved so far. Gives up with GenerationError after a bounded number of
// collisions.
class AtomPool {
  public:
    AtomPool(Rng& rng, std::string_view alphabet = kDefaultAlphabet);

    std::string fresh();
    // Any atom, not recorded as used and possibly repeating earlier draws,
    // but never equal to a reserved atom.
    std::string any();
    void reserve(const std::string& atom) { used_.insert(atom); }
    bool used(const std::string& atom) const { return used_.contains(atom); }
    std::size_t capacity() const noexcept { return capacity_; }

  private:
    std::string draw();

    Rng& rng_;
    std::string alphabet_;
    std::unordered_set<std::string> used_;
    std::size_t capacity_;
};

struct SymbolAtom {
    std::string text;
};

struct DictionaryRecord {
    std::string identifier;
    std::vector<std::pair<std::string, std::string>> entries;  // property -> value, in render order
};

struct ChainedDictTask {
    std::vector<DictionaryRecord> dictionaries;
    std::vector<std::pair<std::string, std::string>> chain;  // (dictionary id, property)
    std::string terminal_value;
};

struct ListRecord {
    std::size_t list_id = 0;
    std::vector<std::string> items;
};

struct ListCitationTask {
    std::vector<ListRecord> lists;
    std::string query_atom;
    std::pair<std::size_t, std::size_t> gold_ids;  // ascending
};

struct KvTask {
    std::vector<std::pair<std::string, std::string>> pairs;
    std::string query_key;
    std::string gold_value;
};

enum class KeyKind { atom, integer };

struct KvConfig {
    // Unset: add pairs until the budget is reached. Set: use exactly this
    // many pairs unless the budget forces truncation.
    std::optional<std::size_t> n_pairs;
    KeyKind key_kind = KeyKind::atom;
    std::size_t token_budget = 4096;
    std::string alphabet{kDefaultAlphabet};
};

struct ChainedDictConfig {
    std::size_t hops = 3;
    std::optional<std::size_t> n_dictionaries;  // default hops + 17
    std::size_t entries_per_dictionary = 4;
    std::size_t token_budget = 4096;
    std::string alphabet{kDefaultAlphabet};

    std::size_t dictionaries() const noexcept { return n_dictionaries.value_or(hops + 17); }
};

struct ListCitationConfig {
    std::size_t n_lists = 10;
    std::size_t items_per_list = 180;
    std::size_t token_budget = 4096;
    std::string alphabet{kDefaultAlphabet};
};

inline constexpr std::size_t kMinDistractorDictionaries = 1;

// Renderers. A rendered Example has task/variant/documents/query/gold/needles
// filled in; example_id is left empty for the caller.
Example render_kv(const KvTask& task, std::uint64_t seed);
Example render_chained_dict(const ChainedDictTask& task, std::uint64_t seed);
Example render_list_citation(const ListCitationTask& task, std::uint64_t seed);

std::string chained_query(const ChainedDictTask& task);
std::string kv_query(std::string_view key);
std::string list_query(std::string_view atom);
std::string citation_answer(std::size_t a, std::size_t b);

Example gen_kv_retrieval(const KvConfig& cfg, std::uint64_t seed, const TokenCounter& counter = {});
Example gen_chained_dict(const ChainedDictConfig& cfg, std::uint64_t seed,
                         const TokenCounter& counter = {});
Example gen_list_citation(const ListCitationConfig& cfg, std::uint64_t seed,
                          const TokenCounter& counter = {});

// Re-derives the answer from the rendered documents and query only.
// Throws ValidationError for non-symbolic examples, ParseError for
// unreadable contexts, TraversalError for broken chains and
// ConsistencyError when the context admits no unique answer.
std::string oracle_answer(const Example& ex);

}  // namespace synthctx::symbolic
