#include <doctest.h>

#include <sstream>

#include "support/oracles.hpp"
#include "support/temp_dir.hpp"
#include "synthctx/dataset_io.hpp"
#include "synthctx/error.hpp"
#include "synthctx/hash.hpp"
#include "synthctx/scoring.hpp"
#include "synthctx/trace.hpp"

using namespace synthctx;

namespace {

const TraceHeader kHeader{"toy", 1, 2, "tok", "ds", Decoding::greedy};

// Context positions 5 and 6 hold the answer tokens 20 and 21. Head 0 copies
// both; head 1 looks at position 5 while emitting 21, which is no copy.
ExampleTrace copy_fixture() {
    ExampleTrace t;
    t.example_id = "fx";
    t.context_token_ids = {10, 11, 12, 13, 14, 20, 21, 15};
    t.answer_token_spans = {{5, 7}};
    t.needle_token_spans = {{4, 8}};
    t.steps = {{0, 20, {5, 0}}, {1, 21, {6, 5}}, {2, 2, {7, 7}}};
    t.prediction_text = "x y";
    return t;
}

std::string roundtrip_text(const TraceHeader& h, const std::vector<ExampleTrace>& traces) {
    std::ostringstream out;
    write_traces(h, traces, out);
    return out.str();
}

void expect_format_error(const std::string& content, std::size_t record, const std::string& field) {
    std::istringstream in(content);
    try {
        parse_traces(in);
        FAIL("expected TraceFormatError");
    } catch (const TraceFormatError& e) {
        CHECK(e.record() == record);
        CHECK(e.field() == field);
    }
}

}  // namespace

TEST_CASE("trace header line is fixed") {
    CHECK(serialize_header(kHeader) ==
          R"({"format":"synthctx-trace","version":1,"model_id":"toy","n_layers":1,"n_heads":2,)"
          R"("tokenizer_hash":"tok","dataset_id":"ds","decoding":"greedy"})");
    CHECK(serialize_trace(copy_fixture()) ==
          R"({"example_id":"fx","context_token_ids":[10,11,12,13,14,20,21,15],"answer_token_spans":[[5,7]],)"
          R"("needle_token_spans":[[4,8]],"steps":[{"step":0,"generated_token_id":20,"argmax_positions":[5,0]},)"
          R"({"step":1,"generated_token_id":21,"argmax_positions":[6,5]},)"
          R"({"step":2,"generated_token_id":2,"argmax_positions":[7,7]}],"prediction_text":"x y"})");
}

TEST_CASE("trace round-trip through text and file") {
    Rng rng(1);
    const ModelGeometry g{2, 3};
    const auto h = oracle::small_header(2, 3);
    std::vector<ExampleTrace> traces;
    for (int i = 0; i < 50; ++i) traces.push_back(oracle::random_trace(rng, g));
    const std::string text = roundtrip_text(h, traces);
    std::istringstream in(text);
    const auto back = parse_traces(in);
    CHECK(back.header == h);
    CHECK(back.traces == traces);

    TempDir dir;
    const auto bytes = write_traces(h, traces, dir / "t.jsonl");
    CHECK(bytes == text.size());
    CHECK(read_file(dir / "t.jsonl") == text);
    CHECK(read_traces(dir / "t.jsonl").traces == traces);
}

TEST_CASE("streaming reader reports record indices") {
    const std::string text = roundtrip_text(kHeader, {copy_fixture(), copy_fixture()});
    std::istringstream in(text + "\n");
    TraceReader r(in);
    CHECK(r.next().has_value());
    CHECK(r.record_index() == 1);
    CHECK(r.next().has_value());
    CHECK(r.record_index() == 2);
    CHECK_FALSE(r.next().has_value());
}

TEST_CASE("malformed traces name record and field") {
    const std::string header = serialize_header(kHeader) + "\n";
    std::string rec = serialize_trace(copy_fixture());

    expect_format_error("", 0, "header");
    expect_format_error("not json\n", 0, "header");
    expect_format_error(R"({"format":"other","version":1})" "\n", 0, "format");
    {
        auto j = json::parse(serialize_header(kHeader));
        j["extra"] = 1;
        expect_format_error(j.dump() + "\n", 0, "extra");
        j.erase("extra");
        j["n_heads"] = 0;
        expect_format_error(j.dump() + "\n", 0, "n_heads");
    }
    expect_format_error(header + rec + "\n{broken\n", 2, "record");

    auto j = json::parse(rec);
    j["steps"][1]["argmax_positions"] = {6};
    expect_format_error(header + j.dump() + "\n", 1, "argmax_positions");

    j = json::parse(rec);
    j["steps"][0]["argmax_positions"] = {8, 0};
    expect_format_error(header + j.dump() + "\n", 1, "argmax_positions");

    j = json::parse(rec);
    j["answer_token_spans"] = {{5, 7}, {6, 8}};
    expect_format_error(header + j.dump() + "\n", 1, "answer_token_spans");

    j = json::parse(rec);
    j["needle_token_spans"] = {{3, 3}};
    expect_format_error(header + j.dump() + "\n", 1, "needle_token_spans");

    j = json::parse(rec);
    j["steps"][1]["step"] = 0;
    expect_format_error(header + j.dump() + "\n", 1, "step");

    j = json::parse(rec);
    j["context_token_ids"][0] = -1;
    expect_format_error(header + j.dump() + "\n", 1, "context_token_ids");

    j = json::parse(rec);
    j.erase("prediction_text");
    expect_format_error(header + j.dump() + "\n", 1, "prediction_text");

    j = json::parse(rec);
    j["attention"] = 0.5;
    expect_format_error(header + j.dump() + "\n", 1, "attention");
}

TEST_CASE("writer refuses invalid traces before writing") {
    std::ostringstream out;
    TraceWriter w(out, kHeader);
    const auto before = out.str();
    auto bad = copy_fixture();
    bad.steps[0].argmax_positions = {1};
    CHECK_THROWS_AS(w.write(bad), ValidationError);
    CHECK(out.str() == before);
    CHECK_THROWS_AS(TraceWriter(out, TraceHeader{}), ValidationError);
}

TEST_CASE("retrieved positions of the copy fixture") {
    const auto t = copy_fixture();
    const ModelGeometry g{1, 2};
    CHECK(retrieved_positions(t, g, {0, 0}, t.answer_token_spans) == std::vector<Position>{5, 6});
    CHECK(retrieved_positions(t, g, {0, 1}, t.answer_token_spans).empty());
    CHECK(retrieval_score(t, g, {0, 0}) == 1.0);
    CHECK(retrieval_score(t, g, {0, 1}) == 0.0);
    CHECK(insight_score(t, g, {0, 0}) == 1);
    CHECK(insight_score(t, g, {0, 1}) == 0);
    CHECK_THROWS_AS(retrieved_positions(t, g, {1, 0}, t.answer_token_spans), ValidationError);
}

TEST_CASE("partial copy and repeated tokens count positions, not types") {
    ExampleTrace t;
    t.example_id = "rep";
    // Answer "7 7 8": the token 7 appears twice inside the span.
    t.context_token_ids = {1, 7, 7, 8, 3};
    t.answer_token_spans = {{1, 4}};
    t.needle_token_spans = {{1, 4}};
    t.steps = {{0, 7, {1}}, {1, 7, {1}}, {2, 8, {0}}};
    t.prediction_text = "";
    const ModelGeometry g{1, 1};
    CHECK(retrieval_score(t, g, {0, 0}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    t.steps[1].argmax_positions = {2};
    CHECK(retrieval_score(t, g, {0, 0}) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("no answer positions: score undefined") {
    auto t = copy_fixture();
    t.answer_token_spans.clear();
    CHECK_THROWS_AS(retrieval_score(t, {1, 2}, {0, 0}), UndefinedMetricError);
    CHECK_THROWS_AS(aggregate(kHeader, std::vector<ExampleTrace>{t}, ScoreKind::retrieval), UndefinedMetricError);
}

TEST_CASE("score_heads equals the brute-force oracle") {
    Rng rng(7);
    for (int i = 0; i < 2000; ++i) {
        const ModelGeometry g{1 + rng.below(3), 1 + rng.below(3)};
        const auto t = oracle::random_trace(rng, g);
        for (auto kind : {ScoreKind::retrieval, ScoreKind::insight}) {
            CHECK(score_heads(t, g, kind) == oracle::brute_scores(t, g, kind));
        }
        const HeadId h = HeadId::from_flat(rng.below(g.size()), g);
        CHECK(retrieval_score(t, g, h) == oracle::brute_scores(t, g, ScoreKind::retrieval)[h.flat(g)]);
    }
}

TEST_CASE("aggregate: parallel, serial and streamed agree bit for bit") {
    Rng rng(11);
    const auto h = oracle::small_header(3, 4);
    std::vector<ExampleTrace> traces;
    for (int i = 0; i < 300; ++i) traces.push_back(oracle::random_trace(rng, h.geometry()));
    for (auto kind : {ScoreKind::retrieval, ScoreKind::insight}) {
        const auto par = aggregate(h, traces, kind);
        const auto ser = aggregate_serial(h, traces, kind);
        CHECK(par == ser);
        std::vector<double> mean(h.geometry().size(), 0.0);
        for (const auto& t : traces) {
            const auto s = oracle::brute_scores(t, h.geometry(), kind);
            for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += s[k];
        }
        for (auto& v : mean) v /= static_cast<double>(traces.size());
        CHECK(par.values == mean);
        CHECK(par.n_examples == 300);

        TempDir dir;
        write_traces(h, traces, dir / "t.jsonl");
        for (std::size_t chunk : {1u, 7u, 1000u}) CHECK(aggregate_file(dir / "t.jsonl", kind, chunk) == par);
    }
}

TEST_CASE("aggregate rejects empty input and geometry mismatch") {
    CHECK_THROWS_AS(aggregate(kHeader, {}, ScoreKind::retrieval), ValidationError);
    Rng rng(2);
    auto t = oracle::random_trace(rng, {2, 2});
    CHECK_THROWS_AS(aggregate(kHeader, std::vector<ExampleTrace>{t}, ScoreKind::retrieval), ValidationError);
}

TEST_CASE("head_set keeps exactly the positive heads") {
    ScoreMatrix m;
    m.geometry = {2, 3};
    m.values = {0.0, 0.5, 0.0, 1e-300, 0.0, 1.0};
    m.n_examples = 1;
    const auto s = head_set(m);
    CHECK(s.members == std::set<HeadId>{{0, 1}, {1, 0}, {1, 2}});
    CHECK_THROWS_AS(make_head_set({2, 2}, std::vector<HeadId>{{2, 0}}), ValidationError);
}

TEST_CASE("score matrix file round-trip") {
    ScoreMatrix m;
    m.geometry = {2, 2};
    m.values = {0.1, 1.0 / 3.0, 0.0, 1.0};
    m.kind = ScoreKind::insight;
    m.dataset_id = "d";
    m.model_id = "m";
    m.n_examples = 3;
    m.source_sha256 = "abc";
    CHECK(parse_score_matrix(serialize_score_matrix(m)) == m);
    m.values.push_back(0.5);
    CHECK_THROWS_AS(serialize_score_matrix(m), ValidationError);
    CHECK_THROWS_AS(parse_score_matrix(R"({"format":"synthctx-scores","bogus":1})"), ParseError);
}

TEST_CASE("shipped 2x2 fixture") {
    const auto m = aggregate_file(SYNTHCTX_FIXTURE_DIR "/a11_trace.jsonl", ScoreKind::retrieval);
    CHECK(m.values == std::vector<double>{0, 0, 1, 0});
    CHECK(head_set(m).members == std::set<HeadId>{{1, 0}});
}
