#include "synthctx/symbolic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "synthctx/error.hpp"

namespace synthctx::symbolic {

namespace {

constexpr int kMaxCollisionRetries = 1000;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

// Splits "left: right" at the first ": ".
std::optional<std::pair<std::string_view, std::string_view>> split_entry(std::string_view line) {
    const auto pos = line.find(": ");
    if (pos == std::string_view::npos) return std::nullopt;
    return std::pair{trim(line.substr(0, pos)), trim(line.substr(pos + 2))};
}

Example make_symbolic(Task task, std::uint64_t seed) {
    Example ex;
    ex.task = task;
    ex.variant = {ConceptExpression::symbolic, ContextDiversity::symbolic};
    ex.seed = seed;
    return ex;
}

void require_budget(std::size_t used, std::size_t budget, const char* what) {
    if (used > budget) {
        throw BudgetError(std::string(what) + ": rendered context needs " + std::to_string(used) +
                              " tokens but the budget is " + std::to_string(budget),
                          used - budget);
    }
}

}  // namespace

bool is_atom(std::string_view s, std::string_view alphabet) noexcept {
    if (s.size() != kAtomLength) return false;
    return std::all_of(s.begin(), s.end(), [&](char c) { return alphabet.find(c) != std::string_view::npos; });
}

const std::array<std::string_view, 32>& property_vocabulary() noexcept {
    static constexpr std::array<std::string_view, 32> vocab = {
        "color",   "shape",  "size",    "origin", "owner",   "flavor", "texture", "material",
        "weight",  "height", "length",  "width",  "age",     "style",  "pattern", "sound",
        "scent",   "rank",   "season",  "region", "maker",   "family", "genre",   "mood",
        "element", "symbol", "partner", "rival",  "mentor",  "anchor", "harbor",  "signal",
    };
    return vocab;
}

AtomPool::AtomPool(Rng& rng, std::string_view alphabet) : rng_(rng), alphabet_(alphabet) {
    std::set<char> distinct(alphabet_.begin(), alphabet_.end());
    if (distinct.size() != alphabet_.size() || alphabet_.empty()) {
        throw ConfigError("atom alphabet must be non-empty with distinct characters");
    }
    const double cap = std::pow(static_cast<double>(alphabet_.size()), static_cast<double>(kAtomLength));
    capacity_ = cap > 1e15 ? std::size_t{1000000000000000} : static_cast<std::size_t>(cap);
}

std::string AtomPool::draw() {
    std::string s(kAtomLength, ' ');
    for (auto& c : s) c = alphabet_[static_cast<std::size_t>(rng_.below(alphabet_.size()))];
    return s;
}

std::string AtomPool::fresh() {
    if (used_.size() >= capacity_) throw GenerationError("atom space exhausted: alphabet too small");
    for (int attempt = 0; attempt < kMaxCollisionRetries; ++attempt) {
        std::string s = draw();
        if (used_.insert(s).second) return s;
    }
    throw GenerationError("could not draw a distinct atom after " + std::to_string(kMaxCollisionRetries) +
                          " attempts; alphabet too small");
}

std::string AtomPool::any() {
    if (used_.size() >= capacity_) throw GenerationError("atom space exhausted: alphabet too small");
    for (int attempt = 0; attempt < kMaxCollisionRetries; ++attempt) {
        std::string s = draw();
        if (!used_.contains(s)) return s;
    }
    throw GenerationError("could not draw an unreserved atom after " +
                          std::to_string(kMaxCollisionRetries) + " attempts; alphabet too small");
}

std::string kv_query(std::string_view key) { return "What is the value for key " + std::string(key) + "?"; }

std::string list_query(std::string_view atom) { return "Which lists contain " + std::string(atom) + "?"; }

std::string citation_answer(std::size_t a, std::size_t b) {
    if (a > b) std::swap(a, b);
    return "[" + std::to_string(a) + "][" + std::to_string(b) + "]";
}

std::string chained_query(const ChainedDictTask& task) {
    if (task.chain.empty()) throw GenerationError("chained-dict task has an empty chain");
    std::string q = "What is the ";
    for (std::size_t i = task.chain.size(); i-- > 0;) {
        q += task.chain[i].second;
        q += i == 0 ? " of " : " of the ";
    }
    q += task.chain.front().first;
    q += '?';
    return q;
}

Example render_kv(const KvTask& task, std::uint64_t seed) {
    Example ex = make_symbolic(Task::mdqa, seed);
    Document doc;
    doc.doc_id = 0;
    std::optional<NeedleSpan> gold;
    for (const auto& [k, v] : task.pairs) {
        if (!doc.body.empty()) doc.body += '\n';
        const std::size_t start = doc.body.size();
        doc.body += k;
        doc.body += ": ";
        doc.body += v;
        if (k == task.query_key) gold = NeedleSpan{0, start, doc.body.size(), 0};
    }
    if (!gold) throw GenerationError("key-value task does not contain its query key");
    ex.documents.push_back(std::move(doc));
    ex.needles.push_back(*gold);
    ex.query = kv_query(task.query_key);
    ex.gold_answer = task.gold_value;
    return ex;
}

Example render_chained_dict(const ChainedDictTask& task, std::uint64_t seed) {
    Example ex = make_symbolic(Task::musique, seed);
    std::map<std::string, std::size_t> hop_of;  // dictionary id -> hop index
    for (std::size_t i = 0; i < task.chain.size(); ++i) hop_of[task.chain[i].first] = i;

    for (std::size_t d = 0; d < task.dictionaries.size(); ++d) {
        const auto& dict = task.dictionaries[d];
        Document doc;
        doc.doc_id = d;
        doc.body = "Dictionary " + dict.identifier + ":";
        auto hop = hop_of.find(dict.identifier);
        for (const auto& [prop, value] : dict.entries) {
            doc.body += '\n';
            const std::size_t start = doc.body.size();
            doc.body += prop;
            doc.body += ": ";
            doc.body += value;
            if (hop != hop_of.end() && task.chain[hop->second].second == prop) {
                ex.needles.push_back({d, start, doc.body.size(), hop->second});
            }
        }
        ex.documents.push_back(std::move(doc));
    }
    std::sort(ex.needles.begin(), ex.needles.end(),
              [](const NeedleSpan& a, const NeedleSpan& b) { return a.needle_index < b.needle_index; });
    ex.query = chained_query(task);
    ex.gold_answer = task.terminal_value;
    return ex;
}

Example render_list_citation(const ListCitationTask& task, std::uint64_t seed) {
    Example ex = make_symbolic(Task::summhay_cite, seed);
    std::size_t needle_index = 0;
    for (const auto& list : task.lists) {
        Document doc;
        doc.doc_id = list.list_id;
        for (const auto& item : list.items) {
            if (!doc.body.empty()) doc.body += ' ';
            const std::size_t start = doc.body.size();
            doc.body += item;
            if (item == task.query_atom) ex.needles.push_back({list.list_id, start, doc.body.size(), needle_index++});
        }
        ex.documents.push_back(std::move(doc));
    }
    ex.query = list_query(task.query_atom);
    ex.gold_answer = citation_answer(task.gold_ids.first, task.gold_ids.second);
    return ex;
}

Example gen_kv_retrieval(const KvConfig& cfg, std::uint64_t seed, const TokenCounter& counter) {
    if (cfg.n_pairs && *cfg.n_pairs < 1) throw ValidationError("kv retrieval needs n_pairs >= 1");
    Rng rng(seed);
    AtomPool atoms(rng, cfg.alphabet);
    std::unordered_set<std::string> used_ints;

    auto make_key = [&]() -> std::string {
        if (cfg.key_kind == KeyKind::atom) return atoms.fresh();
        for (int i = 0; i < kMaxCollisionRetries; ++i) {
            std::string k = std::to_string(1000000 + rng.below(9000000));
            if (used_ints.insert(k).second) return k;
        }
        throw GenerationError("could not draw a distinct integer key");
    };
    auto make_value = [&]() -> std::string {
        if (cfg.key_kind == KeyKind::atom) return atoms.any();
        return std::to_string(1000000 + rng.below(9000000));
    };

    // Incremental cost is exact for the whitespace and byte modes; anything
    // else is corrected by the final trim loop.
    auto line_cost = [&](const std::string& k, const std::string& v, bool first) {
        std::string line = k + ": " + v;
        return counter.count(line) + (first ? 0 : counter.count("\n"));
    };

    KvTask task;
    std::size_t used = 0;
    const std::size_t target = cfg.n_pairs.value_or(SIZE_MAX);
    while (task.pairs.size() < target) {
        std::string k = make_key();
        std::string v = make_value();
        const std::size_t cost = line_cost(k, v, task.pairs.empty());
        if (used + cost > cfg.token_budget) {
            if (task.pairs.empty()) {
                throw BudgetError("kv retrieval: budget " + std::to_string(cfg.token_budget) +
                                      " cannot hold a single pair",
                                  used + cost - cfg.token_budget);
            }
            break;
        }
        used += cost;
        task.pairs.emplace_back(std::move(k), std::move(v));
    }
    rng.shuffle(task.pairs);
    const std::size_t gold = static_cast<std::size_t>(rng.below(task.pairs.size()));
    task.query_key = task.pairs[gold].first;
    task.gold_value = task.pairs[gold].second;

    Example ex = render_kv(task, seed);
    while (counter.count(ex.documents.front().body) > cfg.token_budget) {
        if (task.pairs.size() == 1) {
            throw BudgetError("kv retrieval: budget cannot hold a single pair",
                              counter.count(ex.documents.front().body) - cfg.token_budget);
        }
        auto drop = task.pairs.size() - 1;
        if (task.pairs[drop].first == task.query_key) --drop;
        task.pairs.erase(task.pairs.begin() + static_cast<std::ptrdiff_t>(drop));
        ex = render_kv(task, seed);
    }
    return ex;
}

Example gen_chained_dict(const ChainedDictConfig& cfg, std::uint64_t seed, const TokenCounter& counter) {
    const auto& vocab = property_vocabulary();
    if (cfg.hops < 1) throw ValidationError("chained-dict needs hops >= 1");
    const std::size_t n_dicts = cfg.dictionaries();
    if (n_dicts < cfg.hops + kMinDistractorDictionaries) {
        throw ValidationError("chained-dict needs n_dictionaries >= hops + " +
                              std::to_string(kMinDistractorDictionaries));
    }
    if (cfg.entries_per_dictionary < 1 || cfg.entries_per_dictionary > vocab.size()) {
        throw ValidationError("entries_per_dictionary must lie in [1, 32]");
    }

    Rng rng(seed);
    AtomPool atoms(rng, cfg.alphabet);

    std::vector<std::string> ids;
    ids.reserve(n_dicts);
    for (std::size_t i = 0; i < n_dicts; ++i) ids.push_back(atoms.fresh());
    // The answer must not name a dictionary, or the chain would continue.
    const std::string terminal = atoms.fresh();

    std::vector<std::string_view> props(vocab.begin(), vocab.end());
    rng.shuffle(props);

    ChainedDictTask task;
    task.terminal_value = terminal;
    for (std::size_t h = 0; h < cfg.hops; ++h) {
        const std::string_view prop = cfg.hops <= props.size() ? props[h] : props[rng.below(props.size())];
        task.chain.emplace_back(ids[h], std::string(prop));
    }

    auto fill_entries = [&](DictionaryRecord& dict, std::optional<std::size_t> hop) {
        std::vector<std::string_view> names(vocab.begin(), vocab.end());
        rng.shuffle(names);
        names.resize(cfg.entries_per_dictionary);
        if (hop) {
            const std::string& want = task.chain[*hop].second;
            if (std::find(names.begin(), names.end(), want) == names.end()) {
                names[static_cast<std::size_t>(rng.below(names.size()))] = want;
            }
        }
        for (auto name : names) {
            std::string value;
            if (hop && name == task.chain[*hop].second) {
                value = *hop + 1 < cfg.hops ? ids[*hop + 1] : terminal;
            } else {
                // Never a dictionary id, so no alternative traversal exists.
                value = atoms.any();
            }
            dict.entries.emplace_back(std::string(name), std::move(value));
        }
    };

    for (std::size_t i = 0; i < n_dicts; ++i) {
        DictionaryRecord dict;
        dict.identifier = ids[i];
        fill_entries(dict, i < cfg.hops ? std::optional<std::size_t>(i) : std::nullopt);
        task.dictionaries.push_back(std::move(dict));
    }
    rng.shuffle(task.dictionaries);

    Example ex = render_chained_dict(task, seed);
    require_budget(context_token_count(ex.documents, counter), cfg.token_budget, "chained-dict");
    return ex;
}

Example gen_list_citation(const ListCitationConfig& cfg, std::uint64_t seed, const TokenCounter& counter) {
    if (cfg.n_lists < 3) throw ValidationError("list-citation needs n_lists >= 3");
    if (cfg.items_per_list < 2) throw ValidationError("list-citation needs items_per_list >= 2");

    Rng rng(seed);
    AtomPool atoms(rng, cfg.alphabet);
    if (atoms.capacity() < 2) throw GenerationError("alphabet too small to avoid collisions with the query atom");

    ListCitationTask task;
    task.query_atom = atoms.fresh();
    auto gold = rng.sample_indices(cfg.n_lists, 2);
    task.gold_ids = {std::min(gold[0], gold[1]), std::max(gold[0], gold[1])};

    for (std::size_t l = 0; l < cfg.n_lists; ++l) {
        ListRecord list;
        list.list_id = l;
        const bool is_gold = l == task.gold_ids.first || l == task.gold_ids.second;
        const std::size_t n_fill = is_gold ? cfg.items_per_list - 1 : cfg.items_per_list;
        for (std::size_t i = 0; i < n_fill; ++i) list.items.push_back(atoms.any());
        if (is_gold) {
            const auto pos = static_cast<std::ptrdiff_t>(rng.below(cfg.items_per_list));
            list.items.insert(list.items.begin() + pos, task.query_atom);
        }
        task.lists.push_back(std::move(list));
    }

    Example ex = render_list_citation(task, seed);
    require_budget(context_token_count(ex.documents, counter), cfg.token_budget, "list-citation");
    return ex;
}

namespace {

std::string oracle_kv(const Example& ex) {
    constexpr std::string_view prefix = "What is the value for key ";
    if (!ex.query.starts_with(prefix) || !ex.query.ends_with("?")) {
        throw ParseError("kv query does not match the rendered template");
    }
    const std::string key = ex.query.substr(prefix.size(), ex.query.size() - prefix.size() - 1);
    std::vector<std::string> hits;
    for (const auto& doc : ex.documents) {
        std::size_t start = 0;
        const std::string_view body = doc.body;
        while (start <= body.size()) {
            std::size_t end = body.find('\n', start);
            if (end == std::string_view::npos) end = body.size();
            const auto line = body.substr(start, end - start);
            if (!trim(line).empty()) {
                auto kv = split_entry(line);
                if (!kv) throw ParseError("kv line without ': ' separator: '" + std::string(line) + "'");
                if (kv->first == key) hits.emplace_back(kv->second);
            }
            start = end + 1;
        }
    }
    if (hits.size() != 1) {
        throw ConsistencyError("kv key '" + key + "' occurs " + std::to_string(hits.size()) + " times");
    }
    return hits.front();
}

struct ParsedDictionary {
    std::string id;
    std::vector<std::pair<std::string, std::string>> entries;
};

std::vector<ParsedDictionary> parse_dictionaries(const Example& ex) {
    std::vector<ParsedDictionary> dicts;
    for (const auto& doc : ex.documents) {
        std::size_t start = 0;
        const std::string_view body = doc.body;
        bool open = false;
        while (start <= body.size()) {
            std::size_t end = body.find('\n', start);
            if (end == std::string_view::npos) end = body.size();
            const auto line = trim(body.substr(start, end - start));
            start = end + 1;
            if (line.empty()) continue;
            if (line.starts_with("Dictionary ") && line.ends_with(":")) {
                dicts.push_back({std::string(trim(line.substr(11, line.size() - 12))), {}});
                open = true;
                continue;
            }
            if (!open) throw ParseError("dictionary entry before any 'Dictionary <id>:' header");
            auto kv = split_entry(line);
            if (!kv) throw ParseError("dictionary line without ': ' separator: '" + std::string(line) + "'");
            dicts.back().entries.emplace_back(std::string(kv->first), std::string(kv->second));
        }
    }
    return dicts;
}

std::string oracle_chained(const Example& ex) {
    constexpr std::string_view prefix = "What is the ";
    std::string_view q = ex.query;
    if (!q.starts_with(prefix) || !q.ends_with("?")) throw ParseError("chained query does not match the template");
    q = q.substr(prefix.size(), q.size() - prefix.size() - 1);

    std::vector<std::string> props;  // outermost first
    for (;;) {
        const auto pos = q.find(" of the ");
        if (pos == std::string_view::npos) break;
        props.emplace_back(q.substr(0, pos));
        q = q.substr(pos + 8);
    }
    const auto last = q.rfind(" of ");
    if (last == std::string_view::npos) throw ParseError("chained query lacks the starting dictionary");
    props.emplace_back(q.substr(0, last));
    const std::string start_id(q.substr(last + 4));
    std::reverse(props.begin(), props.end());  // hop order

    const auto dicts = parse_dictionaries(ex);

    // Exhaustive search: follow every dictionary carrying the current id.
    std::set<std::string> answers;
    std::vector<std::pair<std::string, std::size_t>> frontier{{start_id, 0}};
    while (!frontier.empty()) {
        auto [id, hop] = frontier.back();
        frontier.pop_back();
        bool found_dict = false;
        for (const auto& d : dicts) {
            if (d.id != id) continue;
            found_dict = true;
            bool found_prop = false;
            for (const auto& [prop, value] : d.entries) {
                if (prop != props[hop]) continue;
                found_prop = true;
                if (hop + 1 == props.size()) {
                    answers.insert(value);
                } else {
                    frontier.emplace_back(value, hop + 1);
                }
            }
            if (!found_prop) {
                throw TraversalError("dictionary '" + id + "' has no property '" + props[hop] + "'");
            }
        }
        if (!found_dict) throw TraversalError("no dictionary named '" + id + "'");
    }
    if (answers.size() != 1) {
        throw ConsistencyError("chained query admits " + std::to_string(answers.size()) + " answers");
    }
    return *answers.begin();
}

std::string oracle_lists(const Example& ex) {
    constexpr std::string_view prefix = "Which lists contain ";
    if (!ex.query.starts_with(prefix) || !ex.query.ends_with("?")) {
        throw ParseError("list query does not match the template");
    }
    const std::string atom = ex.query.substr(prefix.size(), ex.query.size() - prefix.size() - 1);
    std::vector<std::uint64_t> holders;
    for (const auto& doc : ex.documents) {
        std::size_t pos = 0;
        const std::string_view body = doc.body;
        bool hit = false;
        while (pos < body.size()) {
            while (pos < body.size() && (body[pos] == ' ' || body[pos] == '\n')) ++pos;
            std::size_t end = pos;
            while (end < body.size() && body[end] != ' ' && body[end] != '\n') ++end;
            if (end > pos && body.substr(pos, end - pos) == atom) hit = true;
            pos = end;
        }
        if (hit) holders.push_back(doc.doc_id);
    }
    if (holders.size() != 2) {
        throw ConsistencyError("query atom '" + atom + "' found in " + std::to_string(holders.size()) +
                               " lists (expected 2)");
    }
    return citation_answer(holders[0], holders[1]);
}

}  // namespace

std::string oracle_answer(const Example& ex) {
    if (!ex.variant.symbolic()) throw ValidationError("oracle_answer needs a symbolic example");
    switch (ex.task) {
        case Task::mdqa: return oracle_kv(ex);
        case Task::musique: return oracle_chained(ex);
        case Task::summhay_cite: return oracle_lists(ex);
    }
    throw ValidationError("unknown task");
}

}  // namespace synthctx::symbolic
