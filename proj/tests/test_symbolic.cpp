#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

#include "synthctx/error.hpp"
#include "synthctx/symbolic.hpp"
#include "synthctx/tokenizer.hpp"
#include "synthctx/validate.hpp"

using namespace synthctx;
using namespace synthctx::symbolic;

namespace {

std::vector<std::string> lines_of(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

// Independent readers used as oracles below.
std::string kv_lookup(const Example& ex, const std::string& key) {
    std::string found;
    int hits = 0;
    for (const auto& l : lines_of(ex.documents.at(0).body)) {
        if (l.rfind(key + ": ", 0) == 0) {
            found = l.substr(key.size() + 2);
            ++hits;
        }
    }
    REQUIRE(hits == 1);
    return found;
}

std::string chain_walk(const Example& ex) {
    // "What is the pN of the ... p1 of ID?"
    std::string q = ex.query;
    REQUIRE(q.rfind("What is the ", 0) == 0);
    q = q.substr(12, q.size() - 13);
    std::vector<std::string> parts;
    for (std::size_t pos = 0;;) {
        auto next = q.find(" of ", pos);
        if (next == std::string::npos) {
            parts.push_back(q.substr(pos));
            break;
        }
        parts.push_back(q.substr(pos, next - pos));
        pos = next + 4;
    }
    std::string cur = parts.back();
    std::map<std::string, std::map<std::string, std::string>> dicts;
    for (const auto& d : ex.documents) {
        auto ls = lines_of(d.body);
        const std::string id = ls.at(0).substr(11, ls[0].size() - 12);
        for (std::size_t i = 1; i < ls.size(); ++i) {
            const auto c = ls[i].find(": ");
            dicts[id][ls[i].substr(0, c)] = ls[i].substr(c + 2);
        }
    }
    for (std::size_t i = parts.size() - 1; i-- > 0;) {
        std::string prop = parts[i];
        if (prop.rfind("the ", 0) == 0) prop = prop.substr(4);
        cur = dicts.at(cur).at(prop);
    }
    return cur;
}

}  // namespace

TEST_CASE("atoms are 4 characters from the alphabet and fresh ones never repeat") {
    Rng rng(3);
    AtomPool pool(rng);
    std::set<std::string> seen;
    for (int i = 0; i < 2000; ++i) {
        auto a = pool.fresh();
        CHECK(is_atom(a));
        CHECK(seen.insert(a).second);
    }
    CHECK(is_atom("ab12"));
    CHECK_FALSE(is_atom("ab1"));
    CHECK_FALSE(is_atom("AB12"));
}

TEST_CASE("citation answers render ascending") {
    CHECK(citation_answer(3, 7) == "[3][7]");
    CHECK(citation_answer(7, 3) == "[3][7]");
}

TEST_CASE("kv retrieval: lookup oracle and budget") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        KvConfig cfg;
        cfg.token_budget = 512;
        auto ex = gen_kv_retrieval(cfg, seed);
        const std::string key = ex.query.substr(std::string("What is the value for key ").size(), 4);
        CHECK(kv_lookup(ex, key) == ex.gold_answer);
        CHECK(oracle_answer(ex) == ex.gold_answer);
        CHECK(token_count(ex.documents[0].body, {}) <= 512);
        CHECK(validate_example(ex).empty());
    }
    KvConfig fixed;
    fixed.n_pairs = 5;
    fixed.key_kind = KeyKind::integer;
    auto ex = gen_kv_retrieval(fixed, 1);
    CHECK(lines_of(ex.documents[0].body).size() == 5);
    CHECK(oracle_answer(ex) == ex.gold_answer);
}

TEST_CASE("kv retrieval: byte budget too small for one pair") {
    KvConfig cfg;
    cfg.token_budget = 5;
    CHECK_THROWS_AS(gen_kv_retrieval(cfg, 0, TokenCounter({TokenizerMode::byte_count, std::nullopt, 1.0})),
                    BudgetError);
}

TEST_CASE("chained dictionaries: independent traversal agrees") {
    for (std::size_t hops : {1u, 2u, 3u, 5u}) {
        for (std::uint64_t seed = 0; seed < 30; ++seed) {
            ChainedDictConfig cfg;
            cfg.hops = hops;
            auto ex = gen_chained_dict(cfg, seed);
            CHECK(ex.documents.size() == hops + 17);
            CHECK(ex.needles.size() == hops);
            CHECK(chain_walk(ex) == ex.gold_answer);
            CHECK(oracle_answer(ex) == ex.gold_answer);
            CHECK(validate_example(ex).empty());
        }
    }
    ChainedDictConfig bad;
    bad.hops = 3;
    bad.n_dictionaries = 3;
    CHECK_THROWS_AS(gen_chained_dict(bad, 0), ValidationError);
}

TEST_CASE("list citation: counts and ascending gold") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        auto ex = gen_list_citation({}, seed);
        REQUIRE(ex.documents.size() == 10);
        const std::string atom = ex.query.substr(std::string("Which lists contain ").size(), 4);
        std::vector<std::size_t> holders;
        for (const auto& d : ex.documents) {
            std::istringstream in(d.body);
            std::size_t n = 0, hits = 0;
            for (std::string w; in >> w; ++n) hits += w == atom;
            CHECK(n == 180);
            CHECK(hits <= 1);
            if (hits) holders.push_back(d.doc_id);
        }
        REQUIRE(holders.size() == 2);
        CHECK(ex.gold_answer == "[" + std::to_string(holders[0]) + "][" + std::to_string(holders[1]) + "]");
        CHECK(oracle_answer(ex) == ex.gold_answer);
    }
    CHECK_THROWS_AS(gen_list_citation({}, 0, TokenCounter({TokenizerMode::byte_count, std::nullopt, 1.0})),
                    BudgetError);
}

TEST_CASE("oracle refuses ambiguous or broken contexts") {
    KvConfig cfg;
    cfg.n_pairs = 4;
    auto ex = gen_kv_retrieval(cfg, 2);
    const std::string key = ex.query.substr(std::string("What is the value for key ").size(), 4);
    ex.documents[0].body += "\n" + key + ": zzzz";
    CHECK_THROWS_AS(oracle_answer(ex), ConsistencyError);

    ChainedDictConfig ccfg;
    ccfg.hops = 2;
    auto chain = gen_chained_dict(ccfg, 4);
    // Drop the needle line of hop 0 so the walk dead-ends.
    const auto& n = chain.needles.at(0);
    for (auto& d : chain.documents) {
        if (d.doc_id == n.doc_id) d.body.erase(n.char_start - 1, n.char_end - n.char_start + 1);
    }
    CHECK_THROWS_AS(oracle_answer(chain), TraversalError);

    Example text;
    text.task = Task::mdqa;
    text.variant = {ConceptExpression::low, ContextDiversity::low};
    CHECK_THROWS_AS(oracle_answer(text), ValidationError);
}

TEST_CASE("generators are pure in the seed") {
    CHECK(gen_kv_retrieval({}, 11) == gen_kv_retrieval({}, 11));
    CHECK(gen_chained_dict({}, 11) == gen_chained_dict({}, 11));
    CHECK(gen_list_citation({}, 11) == gen_list_citation({}, 11));
    CHECK_FALSE(gen_list_citation({}, 11) == gen_list_citation({}, 12));
}
