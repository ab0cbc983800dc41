#include "synthctx/gen.hpp"

#include <omp.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <set>

#include "synthctx/error.hpp"
#include "synthctx/hash.hpp"
#include "synthctx/rng.hpp"
#include "synthctx/validate.hpp"

namespace synthctx {

namespace {

using augment::TemplateId;

// Sub-stream tags under an example's seed.
enum Stream : std::uint64_t { kLayout = 1, kSeedRecord = 2, kSymbolize = 3, kAssemble = 4, kSymbolic = 5 };

// ---- builtin fictional seeds ------------------------------------------------

enum class Kind { person, place, org, work, region };

constexpr std::string_view kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
                                        "br", "dr", "kl", "st", "th", "vr"};
constexpr std::string_view kVowels[] = {"a", "e", "i", "o", "u", "ai", "ea", "ou"};
constexpr std::string_view kCodas[] = {"", "", "", "n", "r", "l", "s", "th", "m", "x"};

std::string syllables(Rng& rng, std::size_t n) {
    std::string w;
    for (std::size_t i = 0; i < n; ++i) {
        w += kOnsets[rng.below(std::size(kOnsets))];
        w += kVowels[rng.below(std::size(kVowels))];
    }
    w += kCodas[rng.below(std::size(kCodas))];
    w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
    return w;
}

std::string fake_entity(Rng& rng, Kind kind) {
    static constexpr std::string_view place_suffix[] = {"mouth", "ford", "vale", "burg", "holm", "wick"};
    static constexpr std::string_view org_suffix[] = {"Institute", "Company", "Society", "Academy", "Guild"};
    static constexpr std::string_view work_suffix[] = {"Chronicle", "Saga", "Ledger", "Sonata", "Almanac"};
    switch (kind) {
        case Kind::person: return syllables(rng, 2) + " " + syllables(rng, 2 + rng.below(2));
        case Kind::place: return syllables(rng, 2) + std::string(place_suffix[rng.below(std::size(place_suffix))]);
        case Kind::org: return syllables(rng, 2) + " " + std::string(org_suffix[rng.below(std::size(org_suffix))]);
        case Kind::work: return syllables(rng, 3) + " " + std::string(work_suffix[rng.below(std::size(work_suffix))]);
        case Kind::region: return syllables(rng, 3) + "ia";
    }
    return syllables(rng, 2);
}

// Draws an entity that neither contains nor is contained in any taken one,
// so symbolization never has to arbitrate overlaps.
std::string distinct_entity(Rng& rng, Kind kind, std::vector<std::string>& taken) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        std::string e = fake_entity(rng, kind);
        bool clash = false;
        for (const auto& t : taken) {
            if (t.find(e) != std::string::npos || e.find(t) != std::string::npos) clash = true;
        }
        if (!clash) {
            taken.push_back(e);
            return e;
        }
    }
    throw GenerationError("could not draw a distinct fictional entity");
}

struct QaForm {
    std::string_view question;  // {s}
    std::string_view sentence;  // {s}, {o}
    Kind subject;
    std::optional<Kind> object;  // unset: a year
};

constexpr QaForm kQaForms[] = {
    {"Where was {s} born?", "{s} was born in {o}.", Kind::person, Kind::place},
    {"Who founded {s}?", "{s} was founded by {o}.", Kind::org, Kind::person},
    {"Who wrote {s}?", "{s} was written by {o}.", Kind::work, Kind::person},
    {"What is the capital of {s}?", "The capital of {s} is {o}.", Kind::region, Kind::place},
    {"Where is {s} located?", "{s} is located in {o}.", Kind::org, Kind::place},
    {"Who directed {s}?", "{s} was directed by {o}.", Kind::work, Kind::person},
    {"When was {s} founded?", "{s} was founded in {o}.", Kind::org, std::nullopt},
};

struct Relation {
    std::string_view name;
    Kind subject;
    Kind object;
};

constexpr Relation kRelations[] = {
    {"author", Kind::work, Kind::person},      {"director", Kind::work, Kind::person},
    {"publisher", Kind::work, Kind::org},      {"birthplace", Kind::person, Kind::place},
    {"spouse", Kind::person, Kind::person},    {"employer", Kind::person, Kind::org},
    {"founder", Kind::org, Kind::person},      {"headquarters", Kind::org, Kind::place},
    {"country", Kind::place, Kind::region},    {"mayor", Kind::place, Kind::person},
    {"capital", Kind::region, Kind::place},    {"ruler", Kind::region, Kind::person},
};

constexpr std::string_view kInsightForms[] = {
    "{a} expanded its operations in {p}, and its quarterly revenue grew by {n} percent.",
    "Analysts at {a} warned that demand would slow in {p}, but {b} expects a recovery next year.",
    "{a} adopted a new remote work policy; employees in {p} reported higher satisfaction.",
    "The logistics program at {a} cut costs by {n} percent and shortened delivery times in {p}.",
    "Regulators in {p} opened an inquiry into {a}, yet the company kept its hiring plans unchanged.",
    "{a} and {b} signed a supply agreement that lowers component prices by {n} percent.",
};

std::string fill(std::string_view form, std::initializer_list<std::pair<std::string_view, std::string>> vars) {
    std::string out(form);
    for (const auto& [key, value] : vars) {
        for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + value.size())) {
            out.replace(pos, key.size(), value);
        }
    }
    return out;
}

std::string random_insight(Rng& rng, std::vector<std::string>& taken) {
    const auto form = kInsightForms[rng.below(std::size(kInsightForms))];
    const std::string a = distinct_entity(rng, Kind::org, taken);
    const std::string b = distinct_entity(rng, Kind::org, taken);
    const std::string p = distinct_entity(rng, Kind::place, taken);
    return fill(form, {{"{a}", a}, {"{b}", b}, {"{p}", p}, {"{n}", std::to_string(3 + rng.below(40))}});
}

std::string chain_question(const std::vector<templates::KnowledgeTriple>& triples) {
    std::string q = "What is the ";
    for (std::size_t i = triples.size(); i-- > 0;) {
        q += triples[i].relation;
        q += i == 0 ? " of " : " of the ";
    }
    q += triples.front().subject;
    q += '?';
    return q;
}

// ---- text helpers -----------------------------------------------------------

std::string trim_copy(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return std::string(s);
}

std::string strip_quotes(std::string s) {
    s = trim_copy(s);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = trim_copy(s.substr(1, s.size() - 2));
    return s;
}

// Splits a backend reply into sentences: one per line, list markers removed,
// lines further cut after sentence-final punctuation.
std::vector<std::string> split_reply_sentences(std::string_view reply) {
    std::vector<std::string> out;
    for (auto raw : split_lines(reply)) {
        std::string line = trim_copy(raw);
        std::size_t k = 0;
        while (k < line.size() && (std::isdigit(static_cast<unsigned char>(line[k])) || line[k] == '.' ||
                                   line[k] == '-' || line[k] == '*' || line[k] == ')')) {
            ++k;
        }
        if (k > 0 && k < line.size() && line[k] == ' ') line = trim_copy(line.substr(k));
        std::size_t start = 0;
        for (std::size_t i = 0; i < line.size(); ++i) {
            const char c = line[i];
            if ((c == '.' || c == '!' || c == '?') && i + 1 < line.size() && line[i + 1] == ' ') {
                auto s = trim_copy(line.substr(start, i + 1 - start));
                if (!s.empty()) out.push_back(std::move(s));
                start = i + 1;
            }
        }
        auto s = trim_copy(line.substr(start));
        if (!s.empty()) out.push_back(std::move(s));
    }
    if (out.empty()) {
        auto whole = trim_copy(reply);
        if (!whole.empty()) out.push_back(std::move(whole));
    }
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out += sep;
        out += parts[i];
    }
    return out;
}

// Token cost of `body + " " + unit` given body's cost. Stateless modes are
// additive across a single space, which keeps long fills linear.
std::size_t grown_cost(const TokenCounter& counter, const std::string& body, std::size_t body_cost,
                       std::string_view unit, std::size_t unit_cost) {
    if (body.empty()) return unit_cost;
    const auto& spec = counter.spec();
    if (spec.mode == TokenizerMode::byte_count) return body_cost + 1 + unit_cost;
    if (spec.mode == TokenizerMode::whitespace_approx && spec.calibration == 1.0 &&
        !std::isspace(static_cast<unsigned char>(body.back())) && !unit.empty() &&
        !std::isspace(static_cast<unsigned char>(unit.front()))) {
        return body_cost + unit_cost;
    }
    std::string grown = body;
    grown += ' ';
    grown += unit;
    return counter.count(grown);
}

// ---- per-task builders ------------------------------------------------------

struct BuildContext {
    const GenConfig& cfg;
    std::size_t index;
    std::uint64_t seed;
    const TokenCounter& counter;
    augment::Augmenter* augmenter;

    std::uint64_t sub(Stream s) const { return derive_seed(seed, s); }
    bool low_expression() const { return cfg.variant.concept_expression == ConceptExpression::low; }
    bool high_diversity() const { return cfg.variant.context_diversity == ContextDiversity::high; }
};

SeedRecord pick_seed(const BuildContext& bc) {
    if (!bc.cfg.seeds.empty()) return bc.cfg.seeds[bc.index % bc.cfg.seeds.size()];
    return builtin_seed(bc.cfg.task, bc.sub(kSeedRecord), bc.cfg.hops);
}

templates::EntityMap entity_map(const BuildContext& bc, const std::vector<std::string>& texts,
                                const std::vector<std::string>& entities) {
    return templates::symbolize_entities(join(texts, "\n"), entities, bc.sub(kSymbolize), bc.cfg.alphabet).map;
}

// Filler documents for the needle documents, before placement.
std::vector<Document> haystack(const BuildContext& bc, const std::vector<Document>& needle_docs,
                               const templates::EntityMap* map) {
    if (!bc.high_diversity()) {
        auto padded = templates::pad_haystack(needle_docs, bc.cfg.token_budget, bc.cfg.padding, bc.counter);
        return {padded.begin() + static_cast<std::ptrdiff_t>(needle_docs.size()), padded.end()};
    }
    const std::size_t want = bc.cfg.documents() > needle_docs.size() ? bc.cfg.documents() - needle_docs.size() : 0;
    Rng rng(bc.sub(kLayout));
    std::vector<Document> fillers;
    for (std::size_t i : rng.sample_indices(bc.cfg.distractor_pool.size(), want)) {
        Document d = bc.cfg.distractor_pool[i];
        if (map && bc.cfg.symbolize_distractors) {
            d.body = templates::apply_entity_map(d.body, *map);
            if (d.title) d.title = templates::apply_entity_map(*d.title, *map);
        }
        fillers.push_back(std::move(d));
    }
    return fillers;
}

Example place(const BuildContext& bc, templates::ContextFragment needles, const std::vector<Document>& fillers) {
    auto frag = templates::assemble_context(needles, fillers, bc.sub(kAssemble), bc.cfg.token_budget, bc.counter);
    Example ex;
    ex.documents = std::move(frag.documents);
    ex.needles = std::move(frag.needles);
    return ex;
}

Example build_mdqa(const BuildContext& bc) {
    QaSeed s = pick_seed(bc).qa;
    std::optional<templates::EntityMap> map;
    auto m = [&](const std::string& t) { return map ? templates::apply_entity_map(t, *map) : t; };
    if (bc.low_expression()) map = entity_map(bc, {s.sentence, s.question, s.answer}, s.entities);

    Document needle{0, m(s.title.value_or(s.entities.front())), m(s.sentence)};
    std::string query = m(s.question);
    std::string gold = m(s.answer);
    if (bc.augmenter) {
        if (map) {
            std::vector<std::string> atoms;
            for (const auto& [entity, atom] : map->entries) atoms.push_back(atom);
            const auto reply = augment::parse_generated_context(
                bc.augmenter->augment(TemplateId::mdqa_context, {{"entity", join(atoms, ", ")}}));
            needle = {0, reply.title, reply.text};
            query = reply.question;
            gold = reply.answer;
        } else {
            needle.body = trim_copy(bc.augmenter->augment(
                TemplateId::mdqa_paraphrase, {{"sentence", s.sentence}, {"question", s.question}, {"answer", s.answer}}));
        }
    }
    if (needle.body.empty()) throw GenerationError("mdqa needle text is empty");
    templates::ContextFragment frag{{needle}, {{0, 0, needle.body.size(), 0}}};
    const auto fillers = haystack(bc, frag.documents, map ? &*map : nullptr);
    Example ex = place(bc, std::move(frag), fillers);
    ex.query = std::move(query);
    ex.gold_answer = std::move(gold);
    return ex;
}

Example build_musique(const BuildContext& bc) {
    ChainSeed s = pick_seed(bc).chain;
    if (s.triples.size() != bc.cfg.hops) {
        throw ValidationError("seed chain has " + std::to_string(s.triples.size()) + " hops, config asks for " +
                              std::to_string(bc.cfg.hops));
    }
    std::optional<templates::EntityMap> map;
    auto m = [&](const std::string& t) { return map ? templates::apply_entity_map(t, *map) : t; };
    if (bc.low_expression()) {
        std::vector<std::string> texts{s.question, s.answer};
        for (const auto& t : s.triples) texts.push_back(templates::render_needle_template(t));
        map = entity_map(bc, texts, s.entities);
    }

    templates::ContextFragment frag;
    for (std::size_t h = 0; h < s.triples.size(); ++h) {
        templates::KnowledgeTriple t = s.triples[h];
        t.subject = m(t.subject);
        t.object = m(t.object);
        std::string sentence = templates::render_needle_template(t);
        std::string title = t.subject;
        if (bc.augmenter) {
            auto f = augment::parse_labeled_fields(
                bc.augmenter->augment(TemplateId::musique_sentence, {{"fake_entities", sentence}}), {"Title", "Text"});
            title = f["Title"];
            sentence = f["Text"];
        }
        std::string body = sentence;
        if (bc.augmenter && bc.high_diversity()) {
            auto f = augment::parse_labeled_fields(
                bc.augmenter->augment(TemplateId::musique_context, {{"fake_entities", t.subject + "\n" + t.object}}),
                {"Title", "Text"});
            if (!f["Text"].empty()) body += " " + f["Text"];
        }
        if (sentence.empty()) throw GenerationError("musique needle sentence is empty");
        frag.documents.push_back({h, title, body});
        frag.needles.push_back({h, 0, sentence.size(), h});
    }
    const auto fillers = haystack(bc, frag.documents, map ? &*map : nullptr);
    Example ex = place(bc, std::move(frag), fillers);
    ex.query = m(s.question);
    ex.gold_answer = m(s.answer);
    return ex;
}

Example build_summhay(const BuildContext& bc) {
    const InsightSeed s = pick_seed(bc).insight;
    std::string query;
    std::vector<std::string> fragments;
    if (bc.cfg.variant.concept_expression == ConceptExpression::high) {
        query = strip_quotes(bc.augmenter->augment(TemplateId::summhay_rephrase, {{"text", s.insight}}));
        fragments = split_reply_sentences(bc.augmenter->augment(TemplateId::summhay_split, {{"text", query}}));
    } else if (bc.augmenter) {
        query = strip_quotes(bc.augmenter->augment(TemplateId::summhay_simplify, {{"sentence", s.insight}}));
        fragments = split_reply_sentences(bc.augmenter->augment(TemplateId::summhay_split, {{"text", query}}));
    } else {
        query = s.insight;
        fragments = templates::rule_split_insight(s.insight);
    }
    if (query.empty() || fragments.empty()) throw GenerationError("summhay insight produced no text");

    const std::size_t n_docs = bc.cfg.documents();
    Rng rng(bc.sub(kLayout));
    auto gold = rng.sample_indices(n_docs, 2);
    std::sort(gold.begin(), gold.end());

    Example ex;
    std::vector<std::size_t> cost(n_docs, 0);
    ex.documents.resize(n_docs);
    for (std::size_t d = 0; d < n_docs; ++d) ex.documents[d].doc_id = d;
    for (std::size_t g : gold) {
        std::string& body = ex.documents[g].body;
        for (std::size_t i = 0; i < fragments.size(); ++i) {
            if (!body.empty()) body += ' ';
            ex.needles.push_back({g, body.size(), body.size() + fragments[i].size(), i});
            body += fragments[i];
        }
        cost[g] = bc.counter.count(body);
    }
    std::size_t used = cost[gold[0]] + cost[gold[1]];
    if (used > bc.cfg.token_budget) {
        throw BudgetError("summhay needles need " + std::to_string(used) + " tokens, over the budget of " +
                              std::to_string(bc.cfg.token_budget),
                          used - bc.cfg.token_budget);
    }

    std::vector<std::string> units;
    if (!bc.high_diversity()) {
        units.push_back(bc.cfg.padding.text);
    } else if (!s.distractor_insights.empty()) {
        units = s.distractor_insights;
    } else {
        for (const auto& d : bc.cfg.distractor_pool) units.push_back(d.body);
    }
    std::vector<std::size_t> unit_cost;
    for (const auto& u : units) unit_cost.push_back(bc.counter.count(u));

    // Round-robin fill until no document can take another unit.
    std::size_t remaining = bc.cfg.token_budget - used;
    std::vector<char> full(n_docs, 0);
    for (bool progress = true; progress;) {
        progress = false;
        for (std::size_t d = 0; d < n_docs; ++d) {
            if (full[d]) continue;
            const std::size_t u = units.size() == 1 ? 0 : rng.below(units.size());
            std::string& body = ex.documents[d].body;
            const std::size_t next = grown_cost(bc.counter, body, cost[d], units[u], unit_cost[u]);
            const std::size_t delta = next > cost[d] ? next - cost[d] : 0;
            if (delta > remaining || unit_cost[u] == 0) {
                full[d] = 1;
                continue;
            }
            if (!body.empty()) body += ' ';
            body += units[u];
            cost[d] = next;
            remaining -= delta;
            progress = true;
        }
    }
    for (const auto& d : ex.documents) {
        if (d.body.empty()) {
            throw BudgetError("budget " + std::to_string(bc.cfg.token_budget) + " cannot give every one of " +
                                  std::to_string(n_docs) + " documents some text",
                              0);
        }
    }
    std::sort(ex.needles.begin(), ex.needles.end(), [](const NeedleSpan& a, const NeedleSpan& b) {
        return a.doc_id != b.doc_id ? a.doc_id < b.doc_id : a.char_start < b.char_start;
    });
    ex.query = std::move(query);
    ex.gold_answer = symbolic::citation_answer(gold[0], gold[1]);
    return ex;
}

Example build_symbolic(const BuildContext& bc) {
    const auto& cfg = bc.cfg;
    const std::uint64_t seed = bc.sub(kSymbolic);
    switch (cfg.task) {
        case Task::mdqa: {
            symbolic::KvConfig k;
            k.n_pairs = cfg.kv_pairs;
            k.key_kind = cfg.key_kind;
            k.token_budget = cfg.token_budget;
            k.alphabet = cfg.alphabet;
            return symbolic::gen_kv_retrieval(k, seed, bc.counter);
        }
        case Task::musique: {
            symbolic::ChainedDictConfig c;
            c.hops = cfg.hops;
            c.n_dictionaries = cfg.n_dictionaries;
            c.entries_per_dictionary = cfg.entries_per_dictionary;
            c.token_budget = cfg.token_budget;
            c.alphabet = cfg.alphabet;
            return symbolic::gen_chained_dict(c, seed, bc.counter);
        }
        case Task::summhay_cite: {
            symbolic::ListCitationConfig l;
            l.n_lists = cfg.n_lists;
            l.items_per_list = cfg.items_per_list;
            l.token_budget = cfg.token_budget;
            l.alphabet = cfg.alphabet;
            return symbolic::gen_list_citation(l, seed, bc.counter);
        }
    }
    throw ValidationError("unknown task");
}

std::string resolve_created_at(const GenConfig& cfg) {
    if (cfg.created_at) return *cfg.created_at;
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
        char* end = nullptr;
        const long long v = std::strtoll(epoch, &end, 10);
        if (end && *end == '\0') {
            const std::time_t t = static_cast<std::time_t>(v);
            std::tm tm{};
            gmtime_r(&t, &tm);
            char buf[32];
            std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
            return buf;
        }
    }
    return augment::utc_timestamp();
}

Dataset finish_dataset(const GenConfig& cfg, std::vector<Example> examples, augment::Augmenter* augmenter) {
    Dataset ds;
    ds.manifest.dataset_id = cfg.dataset_id.empty() ? default_dataset_id(cfg.task, cfg.variant, cfg.master_seed)
                                                    : cfg.dataset_id;
    ds.manifest.task = cfg.task;
    ds.manifest.variant = cfg.variant;
    ds.manifest.count = examples.size();
    ds.manifest.master_seed = cfg.master_seed;
    ds.manifest.token_budget = cfg.token_budget;
    ds.manifest.tokenizer = cfg.tokenizer;
    ds.manifest.tool_version = std::string(kToolVersion);
    ds.manifest.created_at = resolve_created_at(cfg);
    if (augmenter) {
        auto prov = augmenter->provenance();
        if (!prov.empty()) ds.manifest.prompt_provenance = std::move(prov);
    }
    ds.examples = std::move(examples);
    return ds;
}

}  // namespace

// ---- seeds ------------------------------------------------------------------

SeedRecord builtin_seed(Task task, std::uint64_t seed, std::size_t hops) {
    Rng rng(seed);
    SeedRecord r;
    std::vector<std::string> taken;
    switch (task) {
        case Task::mdqa: {
            const QaForm& f = kQaForms[rng.below(std::size(kQaForms))];
            const std::string subj = distinct_entity(rng, f.subject, taken);
            std::string obj;
            r.qa.entities = {subj};
            if (f.object) {
                obj = distinct_entity(rng, *f.object, taken);
                r.qa.entities.push_back(obj);
            } else {
                obj = std::to_string(1700 + rng.below(300));
            }
            r.qa.question = fill(f.question, {{"{s}", subj}});
            r.qa.sentence = fill(f.sentence, {{"{s}", subj}, {"{o}", obj}});
            r.qa.answer = obj;
            r.qa.title = subj;
            break;
        }
        case Task::musique: {
            if (hops < 1) throw ValidationError("hops must be >= 1");
            Kind kind = static_cast<Kind>(rng.below(5));
            std::string current = distinct_entity(rng, kind, taken);
            r.chain.entities.push_back(current);
            for (std::size_t h = 0; h < hops; ++h) {
                std::vector<const Relation*> options;
                for (const auto& rel : kRelations) {
                    if (rel.subject == kind) options.push_back(&rel);
                }
                const Relation& rel = *options[rng.below(options.size())];
                const std::string next = distinct_entity(rng, rel.object, taken);
                r.chain.triples.push_back({current, std::string(rel.name), next, h});
                r.chain.entities.push_back(next);
                current = next;
                kind = rel.object;
            }
            r.chain.question = chain_question(r.chain.triples);
            r.chain.answer = current;
            break;
        }
        case Task::summhay_cite: {
            r.insight.insight = random_insight(rng, taken);
            const std::size_t n = 8 + rng.below(5);
            for (std::size_t i = 0; i < n; ++i) r.insight.distractor_insights.push_back(random_insight(rng, taken));
            break;
        }
    }
    return r;
}

std::vector<SeedRecord> read_seed_file(const std::filesystem::path& path, Task task) {
    const std::string content = read_file(path);
    std::vector<SeedRecord> out;
    std::size_t lineno = 0;
    for (auto line : split_lines(content)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
        SeedRecord r;
        try {
            const json j = json::parse(line);
            auto strings = [&](const char* key) { return j.at(key).get<std::vector<std::string>>(); };
            switch (task) {
                case Task::mdqa:
                    for (auto it = j.begin(); it != j.end(); ++it) {
                        if (it.key() != "question" && it.key() != "answer" && it.key() != "entities" &&
                            it.key() != "sentence" && it.key() != "title") {
                            throw ParseError(where + "unknown field '" + it.key() + "'");
                        }
                    }
                    r.qa.question = j.at("question").get<std::string>();
                    r.qa.answer = j.at("answer").get<std::string>();
                    r.qa.entities = strings("entities");
                    r.qa.sentence = j.contains("sentence") ? j["sentence"].get<std::string>()
                                                           : r.qa.question + " " + r.qa.answer + ".";
                    if (j.contains("title") && !j["title"].is_null()) r.qa.title = j["title"].get<std::string>();
                    if (r.qa.entities.empty()) throw ParseError(where + "entities must not be empty");
                    break;
                case Task::musique:
                    for (auto it = j.begin(); it != j.end(); ++it) {
                        if (it.key() != "triples" && it.key() != "question" && it.key() != "answer" &&
                            it.key() != "entities") {
                            throw ParseError(where + "unknown field '" + it.key() + "'");
                        }
                    }
                    for (const auto& t : j.at("triples")) {
                        const auto v = t.get<std::vector<std::string>>();
                        if (v.size() != 3) throw ParseError(where + "triples are [subject, relation, object]");
                        r.chain.triples.push_back({v[0], v[1], v[2], r.chain.triples.size()});
                    }
                    r.chain.question = j.at("question").get<std::string>();
                    r.chain.answer = j.at("answer").get<std::string>();
                    r.chain.entities = strings("entities");
                    if (r.chain.triples.empty()) throw ParseError(where + "triples must not be empty");
                    break;
                case Task::summhay_cite:
                    for (auto it = j.begin(); it != j.end(); ++it) {
                        if (it.key() != "insight" && it.key() != "distractor_insights") {
                            throw ParseError(where + "unknown field '" + it.key() + "'");
                        }
                    }
                    r.insight.insight = j.at("insight").get<std::string>();
                    if (j.contains("distractor_insights")) r.insight.distractor_insights = strings("distractor_insights");
                    break;
            }
        } catch (const json::exception& e) {
            throw ParseError(where + e.what());
        }
        out.push_back(std::move(r));
    }
    if (out.empty()) throw ValidationError("seed file '" + path.string() + "' holds no records");
    return out;
}

// ---- configuration ----------------------------------------------------------

std::size_t GenConfig::documents() const noexcept {
    return n_documents.value_or(task == Task::musique ? 20 : 10);
}

std::size_t default_count(Task task) noexcept {
    switch (task) {
        case Task::mdqa: return kDefaultCountMdqa;
        case Task::musique: return kDefaultCountMusique;
        case Task::summhay_cite: return kDefaultCountSummhay;
    }
    return 1;
}

std::string default_dataset_id(Task task, const Variant& v, std::uint64_t master_seed) {
    return std::string(to_string(task)) + "-" + std::string(to_string(v.concept_expression)) + "-" +
           std::string(to_string(v.context_diversity)) + "-s" + std::to_string(master_seed);
}

void check_gen_config(const GenConfig& cfg, bool have_backend) {
    check_variant(cfg.task, cfg.variant);
    check_tokenizer_spec(cfg.tokenizer);
    if (cfg.count < 1) throw ConfigError("count must be >= 1");
    if (cfg.token_budget < 256) throw ConfigError("token_budget must be >= 256");
    if (cfg.task == Task::musique && cfg.hops < 1) throw ConfigError("hops must be >= 1");
    if (cfg.variant.symbolic()) return;
    if (cfg.variant.concept_expression == ConceptExpression::high && cfg.task == Task::summhay_cite && !have_backend) {
        throw ConfigError("summhay-cite with high concept expression needs a backend (live or cached)");
    }
    if (cfg.variant.context_diversity == ContextDiversity::high) {
        const bool summhay_units = cfg.task == Task::summhay_cite;
        if (!summhay_units && cfg.distractor_pool.empty()) {
            throw ConfigError("high context diversity needs a distractor_pool");
        }
    }
    if (cfg.documents() < (cfg.task == Task::summhay_cite ? 2u : 1u)) throw ConfigError("n_documents too small");
    if (cfg.padding.text.empty()) throw ConfigError("padding text is empty");
}

std::size_t validation_count(std::size_t count, double fraction) noexcept {
    return static_cast<std::size_t>(std::llround(static_cast<double>(count) * fraction));
}

// ---- generation -------------------------------------------------------------

Example generate_example(const GenConfig& cfg, std::size_t index, const TokenCounter& counter,
                         augment::Augmenter* augmenter) {
    const std::uint64_t seed = derive_seed(cfg.master_seed, index);
    BuildContext bc{cfg, index, seed, counter, augmenter};
    Example ex;
    if (cfg.variant.symbolic()) {
        ex = build_symbolic(bc);
    } else {
        switch (cfg.task) {
            case Task::mdqa: ex = build_mdqa(bc); break;
            case Task::musique: ex = build_musique(bc); break;
            case Task::summhay_cite: ex = build_summhay(bc); break;
        }
    }
    ex.task = cfg.task;
    ex.variant = cfg.variant;
    ex.seed = seed;
    ex.example_id = make_example_id(
        cfg.dataset_id.empty() ? default_dataset_id(cfg.task, cfg.variant, cfg.master_seed) : cfg.dataset_id, index);

    ValidationLimits limits;
    limits.token_budget = cfg.token_budget;
    limits.counter = counter;
    if (cfg.task == Task::musique) limits.hops = cfg.hops;
    const auto violations = validate_example(ex, limits);
    if (!violations.empty()) {
        throw GenerationError("example " + ex.example_id + " failed validation: " + violations.front().code + ": " +
                              violations.front().detail);
    }
    return ex;
}

namespace {

TokenCounter make_counter(const GenConfig& cfg) {
    if (cfg.tokenizer.mode == TokenizerMode::external_vocab) {
        if (!cfg.vocab_path) throw ConfigError("external-vocab tokenizer needs a vocab path");
        return TokenCounter(cfg.tokenizer, *cfg.vocab_path);
    }
    return TokenCounter(cfg.tokenizer);
}

}  // namespace

Dataset generate_dataset(const GenConfig& cfg, augment::Augmenter* augmenter) {
    check_gen_config(cfg, augmenter != nullptr);
    const TokenCounter counter = make_counter(cfg);
    std::vector<Example> examples(cfg.count);
    // The error reported is the one of the lowest failing index, as in a
    // serial run.
    std::exception_ptr failure;
    std::size_t failed_at = cfg.count;
    const int threads = cfg.threads > 0 ? static_cast<int>(cfg.threads) : omp_get_max_threads();
    const auto n = static_cast<std::ptrdiff_t>(cfg.count);
#pragma omp parallel for num_threads(threads) schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        try {
            examples[idx] = generate_example(cfg, idx, counter, augmenter);
        } catch (...) {
#pragma omp critical(gen_failure)
            if (idx < failed_at) {
                failed_at = idx;
                failure = std::current_exception();
            }
        }
    }
    if (failure) std::rethrow_exception(failure);
    return finish_dataset(cfg, std::move(examples), augmenter);
}

Dataset generate_dataset_serial(const GenConfig& cfg, augment::Augmenter* augmenter) {
    check_gen_config(cfg, augmenter != nullptr);
    const TokenCounter counter = make_counter(cfg);
    std::vector<Example> examples;
    examples.reserve(cfg.count);
    for (std::size_t i = 0; i < cfg.count; ++i) examples.push_back(generate_example(cfg, i, counter, augmenter));
    return finish_dataset(cfg, std::move(examples), augmenter);
}

}  // namespace synthctx
