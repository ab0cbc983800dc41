// OpenMP kernels against their serial references.

#include <benchmark/benchmark.h>

#include "synthctx/eval.hpp"
#include "synthctx/gen.hpp"
#include "synthctx/rng.hpp"
#include "synthctx/scoring.hpp"

using namespace synthctx;

namespace {

const TraceHeader kHeader{"bench", 32, 32, "tok", "ds", Decoding::greedy};

std::vector<ExampleTrace> make_traces(std::size_t n) {
    Rng rng(1);
    std::vector<ExampleTrace> out;
    const auto g = kHeader.geometry();
    for (std::size_t i = 0; i < n; ++i) {
        ExampleTrace t;
        t.example_id = "b/" + std::to_string(i);
        for (int k = 0; k < 4096; ++k) t.context_token_ids.push_back(static_cast<TokenId>(rng.below(500)));
        t.answer_token_spans = {{100, 108}};
        t.needle_token_spans = {{90, 120}};
        for (std::size_t s = 0; s < 16; ++s) {
            StepRecord r;
            r.step = s;
            r.generated_token_id = static_cast<TokenId>(rng.below(500));
            for (std::size_t h = 0; h < g.size(); ++h) r.argmax_positions.push_back(static_cast<Position>(rng.below(4096)));
            t.steps.push_back(std::move(r));
        }
        t.prediction_text = "p";
        out.push_back(std::move(t));
    }
    return out;
}

void BM_aggregate(benchmark::State& state) {
    static const auto traces = make_traces(64);
    for (auto _ : state) benchmark::DoNotOptimize(aggregate(kHeader, traces, ScoreKind::retrieval));
}
void BM_aggregate_serial(benchmark::State& state) {
    static const auto traces = make_traces(64);
    for (auto _ : state) benchmark::DoNotOptimize(aggregate_serial(kHeader, traces, ScoreKind::retrieval));
}

std::pair<std::vector<double>, std::vector<double>> scores(std::size_t n) {
    Rng rng(2);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = rng.unit(), b[i] = rng.unit();
    return {a, b};
}

void BM_bootstrap(benchmark::State& state) {
    static const auto ab = scores(400);
    for (auto _ : state) benchmark::DoNotOptimize(paired_bootstrap(ab.first, ab.second));
}
void BM_bootstrap_serial(benchmark::State& state) {
    static const auto ab = scores(400);
    for (auto _ : state) benchmark::DoNotOptimize(paired_bootstrap_serial(ab.first, ab.second));
}

GenConfig gen_config() {
    GenConfig c;
    c.task = Task::summhay_cite;
    c.variant = {ConceptExpression::symbolic, ContextDiversity::symbolic};
    c.count = 200;
    c.master_seed = 3;
    c.created_at = "x";
    return c;
}

void BM_generate(benchmark::State& state) {
    const auto cfg = gen_config();
    for (auto _ : state) benchmark::DoNotOptimize(generate_dataset(cfg));
}
void BM_generate_serial(benchmark::State& state) {
    const auto cfg = gen_config();
    for (auto _ : state) benchmark::DoNotOptimize(generate_dataset_serial(cfg));
}

}  // namespace

BENCHMARK(BM_aggregate)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_aggregate_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_bootstrap)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_bootstrap_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_generate)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_generate_serial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
