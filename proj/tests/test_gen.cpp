#include <doctest.h>

#include <omp.h>

#include "support/stub_backend.hpp"
#include "support/temp_dir.hpp"
#include "synthctx/augment.hpp"
#include "synthctx/error.hpp"
#include "synthctx/gen.hpp"
#include "synthctx/symbolic.hpp"
#include "synthctx/templates.hpp"
#include "synthctx/validate.hpp"

using namespace synthctx;

namespace {

using CE = ConceptExpression;
using CD = ContextDiversity;

GenConfig config(Task task, CE ce, CD cd, std::size_t count = 8) {
    GenConfig c;
    c.task = task;
    c.variant = {ce, cd};
    c.count = count;
    c.master_seed = 42;
    c.token_budget = 1024;
    c.dataset_id = "test";
    c.created_at = "2000-01-01T00:00:00Z";
    return c;
}

std::vector<Document> pool(std::size_t n) {
    std::vector<Document> docs;
    for (std::size_t i = 0; i < n; ++i) {
        docs.push_back({i, "Pool " + std::to_string(i),
                        "Distractor passage number " + std::to_string(i) + " talks about weather and harbours."});
    }
    return docs;
}

// Body is one or more padding blocks joined by single spaces.
bool is_padding(std::string_view body) {
    const std::string_view b = templates::kPaddingBlock;
    if (body.empty()) return false;
    while (true) {
        if (!body.starts_with(b)) return false;
        body.remove_prefix(b.size());
        if (body.empty()) return true;
        if (body.front() != ' ') return false;
        body.remove_prefix(1);
    }
}

std::string serialized(const Dataset& ds) { return serialize_dataset(ds.manifest, ds.examples); }

}  // namespace

TEST_CASE("defaults and config checks") {
    CHECK(default_count(Task::mdqa) == 1400);
    CHECK(default_count(Task::musique) == 400);
    CHECK(default_count(Task::summhay_cite) == 400);
    CHECK(validation_count(1400, 0.1) == 140);
    CHECK(validation_count(400, 0.1) == 40);
    CHECK(config(Task::musique, CE::low, CD::low).documents() == 20);
    CHECK(config(Task::mdqa, CE::low, CD::low).documents() == 10);

    CHECK_THROWS_AS(check_gen_config(config(Task::summhay_cite, CE::high, CD::high), false), ConfigError);
    CHECK_NOTHROW(check_gen_config(config(Task::summhay_cite, CE::high, CD::high), true));
    CHECK_THROWS_AS(check_gen_config(config(Task::mdqa, CE::high, CD::high), false), ConfigError);
    auto small = config(Task::mdqa, CE::symbolic, CD::symbolic);
    small.token_budget = 100;
    CHECK_THROWS_AS(check_gen_config(small, false), ConfigError);
    CHECK_THROWS_AS(check_gen_config(config(Task::mdqa, CE::low, CD::symbolic), false), ValidationError);
}

TEST_CASE("builtin seeds are fictional and self-consistent") {
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto qa = builtin_seed(Task::mdqa, s).qa;
        CHECK_FALSE(qa.question.empty());
        for (const auto& e : qa.entities) CHECK(qa.sentence.find(e) != std::string::npos);
        CHECK(qa.sentence.find(qa.answer) != std::string::npos);

        const auto chain = builtin_seed(Task::musique, s, 3).chain;
        REQUIRE(chain.triples.size() == 3);
        for (std::size_t h = 1; h < 3; ++h) CHECK(chain.triples[h].subject == chain.triples[h - 1].object);
        CHECK(chain.answer == chain.triples.back().object);

        const auto insight = builtin_seed(Task::summhay_cite, s).insight;
        CHECK(templates::rule_split_insight(insight.insight).size() >= 2);
    }
}

TEST_CASE("seed files") {
    TempDir dir;
    write_file(dir / "qa.jsonl",
               R"({"question":"Who built the Lorn gate?","answer":"Pell Arvo","entities":["Lorn","Pell Arvo"],"sentence":"Pell Arvo built the Lorn gate."})"
               "\n");
    const auto seeds = read_seed_file(dir / "qa.jsonl", Task::mdqa);
    REQUIRE(seeds.size() == 1);
    CHECK(seeds[0].qa.answer == "Pell Arvo");
    write_file(dir / "bad.jsonl", R"({"question":"q","answer":"a","entities":[],"color":"red"})" "\n");
    CHECK_THROWS(read_seed_file(dir / "bad.jsonl", Task::mdqa));

    auto cfg = config(Task::mdqa, CE::low, CD::low, 3);
    cfg.seeds = seeds;
    const auto ds = generate_dataset(cfg);
    for (const auto& ex : ds.examples) {
        CHECK(ex.gold_answer.find("Pell") == std::string::npos);
        CHECK(symbolic::is_atom(ex.gold_answer.substr(0, 4)));
    }
}

TEST_CASE("symbolic datasets: ids, oracle, parallel equals serial") {
    for (auto task : {Task::mdqa, Task::musique, Task::summhay_cite}) {
        auto cfg = config(task, CE::symbolic, CD::symbolic, 30);
        cfg.token_budget = 4096;
        const auto par = generate_dataset(cfg);
        const auto ser = generate_dataset_serial(cfg);
        CHECK(serialized(par) == serialized(ser));
        CHECK(par.manifest.count == 30);
        CHECK(par.manifest.created_at == "2000-01-01T00:00:00Z");
        for (std::size_t i = 0; i < par.examples.size(); ++i) {
            CHECK(par.examples[i].example_id == make_example_id("test", i));
            CHECK(symbolic::oracle_answer(par.examples[i]) == par.examples[i].gold_answer);
        }
    }
}

TEST_CASE("thread count does not change the bytes") {
    auto cfg = config(Task::musique, CE::symbolic, CD::symbolic, 40);
    std::string first;
    for (std::size_t threads : {1u, 2u, 4u}) {
        cfg.threads = threads;
        const auto text = serialized(generate_dataset(cfg));
        if (first.empty()) first = text;
        CHECK(text == first);
    }
}

TEST_CASE("templated variants without a backend") {
    struct V {
        Task task;
        CE ce;
        CD cd;
    };
    for (const auto& v : {V{Task::mdqa, CE::low, CD::low}, V{Task::mdqa, CE::high, CD::high},
                          V{Task::mdqa, CE::low, CD::high}, V{Task::musique, CE::low, CD::low},
                          V{Task::musique, CE::high, CD::high}, V{Task::summhay_cite, CE::simplified, CD::low},
                          V{Task::summhay_cite, CE::simplified, CD::high}}) {
        CAPTURE(to_string(v.task));
        CAPTURE(to_string(v.ce));
        CAPTURE(to_string(v.cd));
        auto cfg = config(v.task, v.ce, v.cd, 6);
        cfg.token_budget = 2048;
        cfg.distractor_pool = pool(30);
        const auto ds = generate_dataset(cfg);
        ValidationLimits limits;
        limits.token_budget = cfg.token_budget;
        limits.hops = cfg.hops;
        for (const auto& ex : ds.examples) {
            CHECK(validate_example(ex, limits).empty());
            CHECK(ex.variant == cfg.variant);
            CHECK_FALSE(ex.query.empty());
        }
        CHECK(serialized(ds) == serialized(generate_dataset_serial(cfg)));
    }
}

TEST_CASE("low diversity: padding is whole blocks and fills the budget") {
    for (auto task : {Task::mdqa, Task::musique, Task::summhay_cite}) {
        const CE ce = task == Task::summhay_cite ? CE::simplified : CE::low;
        auto cfg = config(task, ce, CD::low, 10);
        cfg.token_budget = 4096;
        const TokenCounter counter;
        for (const auto& ex : generate_dataset(cfg).examples) {
            std::set<std::uint64_t> needle_docs;
            for (const auto& n : ex.needles) needle_docs.insert(n.doc_id);
            for (const auto& d : ex.documents) {
                if (!needle_docs.contains(d.doc_id)) {
                    CHECK(is_padding(d.body));
                } else if (task == Task::summhay_cite) {
                    std::size_t end = 0;
                    for (const auto& n : ex.needles) {
                        if (n.doc_id == d.doc_id) end = std::max(end, n.char_end);
                    }
                    if (end < d.body.size()) CHECK(is_padding(std::string_view(d.body).substr(end + 1)));
                }
            }
            const std::size_t total = context_token_count(ex.documents, counter);
            CHECK(total <= 4096);
            CHECK(total > 4096 - 19);
        }
    }
}

TEST_CASE("summhay: fragments in exactly two documents, answer cites them") {
    auto cfg = config(Task::summhay_cite, CE::simplified, CD::low, 20);
    for (const auto& ex : generate_dataset(cfg).examples) {
        std::set<std::uint64_t> docs;
        for (const auto& n : ex.needles) docs.insert(n.doc_id);
        REQUIRE(docs.size() == 2);
        CHECK(ex.gold_answer == symbolic::citation_answer(*docs.begin(), *docs.rbegin()));
        CHECK(ex.documents.size() == 10);
    }
}

TEST_CASE("summhay high expression needs the backend") {
    auto cfg = config(Task::summhay_cite, CE::high, CD::high, 2);
    CHECK_THROWS_AS(generate_dataset(cfg), ConfigError);
}

TEST_CASE("backend-assisted generation, then an offline rerun from the cache") {
    StubBackend stub;
    TempDir dir;
    augment::BackendConfig b;
    b.model = "stub";
    b.endpoint = stub.endpoint();
    b.mode = augment::BackendMode::live;
    b.backoff_ms = 0;
    b.timeout_s = 5;
    const auto cache_path = dir / "cache.jsonl";

    struct V {
        Task task;
        CE ce;
        CD cd;
    };
    for (const auto& v : {V{Task::mdqa, CE::low, CD::low}, V{Task::mdqa, CE::high, CD::high},
                          V{Task::musique, CE::low, CD::high}, V{Task::summhay_cite, CE::high, CD::high},
                          V{Task::summhay_cite, CE::simplified, CD::low}}) {
        CAPTURE(to_string(v.task));
        CAPTURE(to_string(v.ce));
        auto cfg = config(v.task, v.ce, v.cd, 4);
        cfg.token_budget = 2048;
        cfg.distractor_pool = pool(30);
        augment::Augmenter live(b, std::make_shared<augment::ResponseCache>(cache_path));
        const auto first = generate_dataset(cfg, &live);
        CHECK(live.network_calls() > 0);
        REQUIRE(first.manifest.prompt_provenance.has_value());
        CHECK_FALSE(first.manifest.prompt_provenance->empty());

        auto offline_cfg = b;
        offline_cfg.mode = augment::BackendMode::cache_only;
        augment::Augmenter offline(offline_cfg, std::make_shared<augment::ResponseCache>(cache_path));
        const auto second = generate_dataset(cfg, &offline);
        CHECK(offline.network_calls() == 0);
        CHECK(serialized(first) == serialized(second));
    }
    // A fresh config misses the cache in offline mode.
    auto cfg = config(Task::mdqa, CE::high, CD::high, 2);
    cfg.master_seed = 999;
    cfg.distractor_pool = pool(30);
    auto offline_cfg = b;
    offline_cfg.mode = augment::BackendMode::cache_only;
    augment::Augmenter offline(offline_cfg, std::make_shared<augment::ResponseCache>(cache_path));
    CHECK_THROWS_AS(generate_dataset(cfg, &offline), CacheMissError);
}

TEST_CASE("dataset file round-trip") {
    TempDir dir;
    auto cfg = config(Task::summhay_cite, CE::symbolic, CD::symbolic, 5);
    cfg.token_budget = 2048;
    const auto ds = generate_dataset(cfg);
    write_dataset(dir / "d.jsonl", ds.manifest, ds.examples);
    const auto back = read_dataset(dir / "d.jsonl");
    CHECK(back.manifest == ds.manifest);
    CHECK(back.examples == ds.examples);
    CHECK(serialize_dataset(back.manifest, back.examples) == read_file(dir / "d.jsonl"));
}
