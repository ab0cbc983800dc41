#include <doctest.h>

#include <set>

#include "synthctx/error.hpp"
#include "synthctx/symbolic.hpp"
#include "synthctx/templates.hpp"
#include "synthctx/tokenizer.hpp"
#include "synthctx/validate.hpp"

using namespace synthctx;
using namespace synthctx::templates;

TEST_CASE("padding block text") {
    CHECK(kPaddingBlock == "The grass is green. The sky is blue. The sun is yellow. Here we go. There and back again.");
}

TEST_CASE("symbolize_entities: longest entity claims first, map is injective") {
    const std::vector<std::string> ents = {"New York", "New York City", "Hudson"};
    auto s = symbolize_entities("New York City lies on the Hudson; New York state is larger.", ents, 1);
    REQUIRE(s.map.size() == 3);
    const auto& city = *s.map.find("New York City");
    const auto& state = *s.map.find("New York");
    const auto& river = *s.map.find("Hudson");
    CHECK(s.text == city + " lies on the " + river + "; " + state + " state is larger.");
    std::set<std::string> atoms = {city, state, river};
    CHECK(atoms.size() == 3);
    for (const auto& a : atoms) CHECK(symbolic::is_atom(a));

    CHECK_THROWS_AS(symbolize_entities("no match here", std::vector<std::string>{"Paris"}, 0), MissingEntityError);
    CHECK(apply_entity_map("Hudson and Nile", s.map) == river + " and Nile");
}

TEST_CASE("symbolize_entities: inverse map restores the text") {
    const std::vector<std::string> ents = {"Ada Quill", "Ravenmoor", "Quill"};
    const std::string text = "Ada Quill was born in Ravenmoor. Quill later left Ravenmoor.";
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto s = symbolize_entities(text, ents, seed);
        EntityMap inverse;
        for (const auto& [e, a] : s.map.entries) inverse.entries.emplace_back(a, e);
        CHECK(apply_entity_map(s.text, inverse) == text);
    }
}

TEST_CASE("needle template") {
    CHECK(render_needle_template({"Vel Arro", "capital", "Nimbrook", 0}) == "The capital of Vel Arro is Nimbrook.");
}

TEST_CASE("pad_haystack: whole blocks, total within one block of the budget") {
    const TokenCounter counter;
    for (std::size_t budget : {300u, 1000u, 4096u}) {
        std::vector<Document> core = {{0, "t", "The needle sentence sits here."}};
        auto docs = pad_haystack(core, budget, {}, counter);
        REQUIRE(docs.size() > 1);
        CHECK(docs[0] == core[0]);
        for (std::size_t i = 1; i < docs.size(); ++i) {
            CHECK(docs[i].doc_id == i);
            // body == block ( " " block )*
            const std::string& b = docs[i].body;
            const std::size_t unit = kPaddingBlock.size() + 1;
            CHECK((b.size() + 1) % unit == 0);
            for (std::size_t off = 0; off < b.size(); off += unit) {
                CHECK(b.compare(off, kPaddingBlock.size(), kPaddingBlock) == 0);
                if (off + kPaddingBlock.size() < b.size()) CHECK(b[off + kPaddingBlock.size()] == ' ');
            }
            CHECK((b.size() + 1) / unit <= 16);
        }
        const std::size_t total = context_token_count(docs, counter);
        CHECK(total <= budget);
        CHECK(total > budget - 19);
    }
    std::vector<Document> big = {{0, std::nullopt, std::string(50, 'x')}};
    CHECK_THROWS_AS(pad_haystack(big, 10, {}, TokenCounter({TokenizerMode::byte_count, std::nullopt, 1.0})),
                    BudgetError);
}

TEST_CASE("assemble_context: needle slot is uniform (chi-square)") {
    const TokenCounter counter;
    ContextFragment needle{{{0, "n", "needle text"}}, {{0, 0, 6, 0}}};
    std::vector<Document> fillers;
    for (std::uint64_t i = 0; i < 9; ++i) fillers.push_back({100 + i, std::nullopt, "filler " + std::to_string(i)});
    const int trials = 20000;
    std::vector<int> counts(10, 0);
    for (int t = 0; t < trials; ++t) {
        auto out = assemble_context(needle, fillers, derive_seed(99, t), 1000, counter);
        REQUIRE(out.documents.size() == 10);
        REQUIRE(out.needles.size() == 1);
        const auto pos = out.needles[0].doc_id;
        CHECK(out.documents[pos].body == "needle text");
        ++counts[pos];
    }
    double chi2 = 0.0;
    const double expect = trials / 10.0;
    for (int c : counts) chi2 += (c - expect) * (c - expect) / expect;
    CHECK(chi2 < 27.88);  // 0.999 quantile, 9 dof
}

TEST_CASE("assemble_context: fillers keep order, over-budget fillers are skipped") {
    const TokenCounter counter;
    ContextFragment needles{{{0, std::nullopt, "a b"}, {1, std::nullopt, "c d"}}, {{0, 0, 1, 0}, {1, 0, 1, 1}}};
    std::vector<Document> fillers = {{0, std::nullopt, "f1"}, {0, std::nullopt, "w w w w w w"}, {0, std::nullopt, "f2"}};
    auto out = assemble_context(needles, fillers, 3, 6, counter);
    std::vector<std::string> order;
    for (const auto& d : out.documents) order.push_back(d.body);
    std::vector<std::string> fill_order;
    for (const auto& b : order) {
        if (b.starts_with("f")) fill_order.push_back(b);
    }
    CHECK(fill_order == std::vector<std::string>{"f1", "f2"});
    CHECK(out.documents.size() == 4);
    for (std::size_t i = 0; i < out.documents.size(); ++i) CHECK(out.documents[i].doc_id == i);
    CHECK(out.documents[out.needles[0].doc_id].body == "a b");
    CHECK(out.documents[out.needles[1].doc_id].body == "c d");
}

TEST_CASE("rule_split_insight fixtures") {
    struct Case {
        const char* in;
        std::vector<std::string> out;
    };
    const std::vector<Case> cases = {
        {"Revenue grew and costs fell.", {"Revenue grew.", "Costs fell."}},
        {"Sales rose; margins narrowed.", {"Sales rose.", "Margins narrowed."}},
        {"Cats and dogs", {"Cats and dogs."}},
        {"The team shipped early, but quality suffered.", {"The team shipped early.", "Quality suffered."}},
        {"Bread and butter sell well.", {"Bread and butter sell well."}},
        {"Users liked the app (speed and design) but disliked ads.",
         {"Users liked the app (speed and design).", "Disliked ads."}},
        {"", {}},
        {"Hello world", {"Hello world."}},
        {"A b and c", {"A b and c."}},
        {"x y, or z", {"X y.", "Z."}},
        {"He said \"stay and wait\" and left quickly.", {"He said \"stay and wait\".", "Left quickly."}},
        {"Prices rose and wages rose and rents rose.", {"Prices rose.", "Wages rose.", "Rents rose."}},
        {"and then some more", {"And then some more."}},
        {"One; two; three", {"One.", "Two.", "Three."}},
        {"Teams that trained longer scored higher, whereas others plateaued.",
         {"Teams that trained longer scored higher.", "Others plateaued."}},
        {"Fast yet cheap", {"Fast yet cheap."}},
        {"Stock fell so investors sold shares.", {"Stock fell.", "Investors sold shares."}},
        {"Tea AND coffee were served and enjoyed.", {"Tea AND coffee were served and enjoyed."}},
        {"   spaced   out   words  ", {"Spaced out words."}},
        {"Profits doubled; however, debt also rose, and the board resigned.",
         {"Profits doubled.", "However, debt also rose.", "The board resigned."}},
        {".", {"."}},
    };
    for (const auto& c : cases) {
        CAPTURE(c.in);
        CHECK(rule_split_insight(c.in) == c.out);
    }
}

TEST_CASE("rule_split_insight never loses content words") {
    const std::string s = "Customers preferred annual plans, and churn dropped; support tickets also fell but slowly.";
    std::string joined;
    for (const auto& f : rule_split_insight(s)) joined += f + " ";
    // fragments are re-capitalized, so compare lowercase
    for (auto& c : joined) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (const char* w : {"customers", "annual", "churn", "tickets", "slowly"}) CHECK(joined.find(w) != std::string::npos);
}

TEST_CASE("validate_example reports each broken invariant") {
    auto ex = symbolic::gen_list_citation({}, 5);
    CHECK(validate_example(ex).empty());

    auto codes = [](const Example& e) {
        std::set<std::string> c;
        for (const auto& v : validate_example(e)) c.insert(v.code);
        return c;
    };
    auto bad = ex;
    bad.needles[0].char_end = bad.documents.at(bad.needles[0].doc_id).body.size() + 5;
    CHECK(codes(bad).contains("span-out-of-bounds"));

    bad = ex;
    bad.documents[1].doc_id = bad.documents[0].doc_id;
    CHECK(codes(bad).contains("duplicate-doc-id"));

    bad = ex;
    bad.gold_answer = "[0][1]" == ex.gold_answer ? "[0][2]" : "[0][1]";
    CHECK(codes(bad).contains("oracle-mismatch"));

    bad = ex;
    bad.needles.clear();
    CHECK(codes(bad).contains("no-needles"));

    ValidationLimits tight;
    tight.token_budget = 100;
    CHECK(!validate_example(ex, tight).empty());
}
