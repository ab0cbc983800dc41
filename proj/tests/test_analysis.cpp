#include <doctest.h>

#include <cmath>
#include <numeric>
#include <regex>
#include <sstream>

#include "support/oracles.hpp"
#include "support/temp_dir.hpp"
#include "synthctx/analysis.hpp"
#include "synthctx/error.hpp"

using namespace synthctx;

namespace {

HeadSet set_of(ModelGeometry g, std::initializer_list<std::size_t> flats) {
    HeadSet s{g, {}};
    for (auto f : flats) s.members.insert(HeadId::from_flat(f, g));
    return s;
}

HeadSet random_set(Rng& rng, ModelGeometry g, double p) {
    HeadSet s{g, {}};
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (rng.unit() < p) s.members.insert(HeadId::from_flat(i, g));
    }
    return s;
}

ScoreMatrix matrix(ModelGeometry g, std::vector<double> v) {
    ScoreMatrix m;
    m.geometry = g;
    m.values = std::move(v);
    m.n_examples = 1;
    m.dataset_id = "real";
    return m;
}

// Sets over a 32x32 grid with the given sizes and overlap.
std::pair<HeadSet, HeadSet> overlapping(std::size_t a, std::size_t b, std::size_t both) {
    const ModelGeometry g{32, 32};
    HeadSet A{g, {}}, B{g, {}};
    std::size_t next = 0;
    for (std::size_t i = 0; i < both; ++i, ++next) {
        A.members.insert(HeadId::from_flat(next, g));
        B.members.insert(HeadId::from_flat(next, g));
    }
    for (std::size_t i = both; i < a; ++i) A.members.insert(HeadId::from_flat(next++, g));
    for (std::size_t i = both; i < b; ++i) B.members.insert(HeadId::from_flat(next++, g));
    return {A, B};
}

}  // namespace

TEST_CASE("recall divides by the second set") {
    const ModelGeometry g{2, 4};
    const auto a = set_of(g, {0, 1, 2});
    const auto b = set_of(g, {1, 2, 3, 4});
    CHECK(intersection_size(a, b) == 2);
    CHECK(recall(a, b) == 0.5);
    CHECK(recall(b, a) == doctest::Approx(2.0 / 3.0));
    CHECK(recall(b, b) == 1.0);
    CHECK_THROWS_AS(recall(a, HeadSet{g, {}}), UndefinedMetricError);
    CHECK(recall(HeadSet{g, {}}, a) == 0.0);
    CHECK_THROWS_AS(recall(a, set_of({4, 2}, {0})), ValidationError);
}

TEST_CASE("recall worked numbers") {
    auto [a, b] = overlapping(100, 129, 86);
    CHECK(recall(a, b) == doctest::Approx(0.6667).epsilon(1e-4));
    CHECK(recall(b, a) == doctest::Approx(0.86));
}

TEST_CASE("recall orientation keeps both reported entries consistent") {
    // Sets of 100 and 129 heads whose two recall entries read 0.67 and 0.87
    // at two decimals. Under |A∩B|/|B| both entries imply the same overlap.
    const double e_ab = 0.67, e_ba = 0.87;
    const double implied_1 = e_ab * 129, implied_2 = e_ba * 100;
    CHECK(std::fabs(implied_1 - implied_2) <= 1.0);
    // The opposite orientation would put the overlap at 67 and 112.
    CHECK(std::fabs(e_ab * 100 - e_ba * 129) > 1.0);
    auto [a, b] = overlapping(100, 129, 87);
    CHECK(std::round(recall(a, b) * 100) / 100 == doctest::Approx(0.67));
    CHECK(std::round(recall(b, a) * 100) / 100 == doctest::Approx(0.87));
}

TEST_CASE("recall agrees with a rational brute-force count") {
    Rng rng(3);
    for (int i = 0; i < 2000; ++i) {
        const ModelGeometry g{1 + rng.below(6), 1 + rng.below(6)};
        const auto a = random_set(rng, g, rng.unit());
        const auto b = random_set(rng, g, rng.unit());
        std::size_t both = 0;
        for (std::size_t f = 0; f < g.size(); ++f) {
            const auto h = HeadId::from_flat(f, g);
            both += a.contains(h) && b.contains(h);
        }
        CHECK(intersection_size(a, b) == both);
        if (b.empty()) {
            CHECK_THROWS_AS(recall(a, b), UndefinedMetricError);
        } else {
            CHECK(recall(a, b) == static_cast<double>(both) / static_cast<double>(b.size()));
        }
    }
}

TEST_CASE("cosine and spearman against naive references") {
    Rng rng(5);
    for (int i = 0; i < 2000; ++i) {
        const std::size_t n = 2 + rng.below(40);
        std::vector<double> x(n), y(n);
        for (std::size_t k = 0; k < n; ++k) {
            // coarse values to force rank ties
            x[k] = static_cast<double>(rng.below(6)) / 5.0;
            y[k] = rng.unit();
        }
        x[0] = 1.0;
        CHECK(cosine(x, y) == doctest::Approx(oracle::naive_cosine(x, y)).epsilon(1e-9));
        const bool constant = std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; });
        if (constant) {
            CHECK_THROWS_AS(spearman(x, y), UndefinedMetricError);
        } else {
            CHECK(spearman(x, y) == doctest::Approx(oracle::naive_spearman(x, y)).epsilon(1e-9));
        }
        CHECK(average_ranks(x) == oracle::naive_ranks(x));
    }
}

TEST_CASE("cosine edge cases") {
    const ModelGeometry g{1, 3};
    CHECK(cosine(matrix(g, {0.2, 0.4, 0}), matrix(g, {0.1, 0.2, 0})) == doctest::Approx(1.0));
    CHECK(cosine(matrix(g, {1, 0, 0}), matrix(g, {0, 1, 0})) == 0.0);
    CHECK_THROWS_AS(cosine(matrix(g, {0, 0, 0}), matrix(g, {0, 1, 0})), UndefinedMetricError);
    CHECK_THROWS_AS(cosine(matrix(g, {1, 0, 0}), matrix({3, 1}, {1, 0, 0})), ValidationError);
    const std::vector<double> a = {1, 2, 3, 4}, b = {10, 20, 30, 40}, c = {4, 3, 2, 1};
    CHECK(spearman(a, b) == doctest::Approx(1.0));
    CHECK(spearman(a, c) == doctest::Approx(-1.0));
}

TEST_CASE("patch plans: sizes, sources, determinism") {
    Rng rng(17);
    for (int i = 0; i < 300; ++i) {
        const ModelGeometry g{1 + rng.below(8), 1 + rng.below(8)};
        const auto real = random_set(rng, g, rng.unit());
        const auto synth = random_set(rng, g, rng.unit());
        const std::uint64_t seed = rng.next();
        const auto p = plan_patch_sets(real, synth, seed, "r", "s");
        std::size_t inter = 0;
        for (const auto& h : real.members) inter += synth.contains(h);
        const std::size_t compl_ = real.size() - inter;
        const std::size_t n = std::min(inter, compl_);
        for (const auto* plan : {&p.intersection, &p.complement, &p.random}) {
            CHECK(plan->n_heads == n);
            CHECK_NOTHROW(check_plan(*plan));
            CHECK(std::is_sorted(plan->heads.begin(), plan->heads.end()));
            CHECK(plan->warning.has_value() == (n == 0));
        }
        for (const auto& h : p.intersection.heads) CHECK((real.contains(h) && synth.contains(h)));
        for (const auto& h : p.complement.heads) CHECK((real.contains(h) && !synth.contains(h)));
        const auto again = plan_patch_sets(real, synth, seed, "r", "s");
        CHECK(again.intersection == p.intersection);
        CHECK(again.complement == p.complement);
        CHECK(again.random == p.random);
    }
}

TEST_CASE("identical head sets give empty plans with a warning") {
    const ModelGeometry g{2, 2};
    const auto s = set_of(g, {0, 3});
    const auto p = plan_patch_sets(s, s, 1);
    CHECK(p.intersection.heads.empty());
    CHECK(p.random.heads.empty());
    REQUIRE(p.complement.warning.has_value());
    CHECK(p.complement.warning->find("complement") != std::string::npos);
}

TEST_CASE("top-k mask: canonical tie order plus equal-size random plans") {
    const ModelGeometry g{2, 3};
    const auto m = matrix(g, {0.5, 0.9, 0.5, 0.0, 0.9, 0.5});
    const auto plans = plan_topk_mask(m, 3, 4, 2);
    REQUIRE(plans.size() == 3);
    CHECK(plans[0].kind == PlanKind::mask_topk);
    CHECK(plans[0].heads == std::vector<HeadId>{{0, 1}, {1, 1}, {0, 0}});
    CHECK(plans[0].provenance.k == 3u);
    for (std::size_t i = 1; i < plans.size(); ++i) {
        CHECK(plans[i].kind == PlanKind::mask_random);
        CHECK(plans[i].n_heads == 3);
        CHECK_NOTHROW(check_plan(plans[i]));
    }
    CHECK(plan_topk_mask(m, 3, 4, 2) == plans);
    CHECK_THROWS_AS(plan_topk_mask(m, 0, 4), ValidationError);
    CHECK_THROWS_AS(plan_topk_mask(m, 7, 4), ValidationError);
}

TEST_CASE("plan records round-trip") {
    const ModelGeometry g{4, 4};
    Rng rng(8);
    const auto p = plan_patch_sets(random_set(rng, g, 0.6), random_set(rng, g, 0.5), 5, "real-ds", "synth-ds");
    for (auto plan : {p.intersection, p.complement, p.random}) {
        plan.provenance.input_sha256 = {"aa", "bb"};
        CHECK(parse_plan(serialize_plan(plan)) == plan);
    }
    TempDir dir;
    std::vector<InterventionPlan> all = {p.intersection, p.complement, p.random};
    write_plans(dir / "plans.jsonl", all);
    CHECK(read_plans(dir / "plans.jsonl") == all);

    auto bad = p.intersection;
    bad.heads.push_back(bad.heads.empty() ? HeadId{9, 9} : bad.heads.front());
    bad.n_heads = bad.heads.size();
    CHECK_THROWS_AS(check_plan(bad), ValidationError);
    CHECK_THROWS(parse_plan(R"({"kind":"mask-topk","extra":1})"));
}

TEST_CASE("heatmap CSV round-trips exactly") {
    Rng rng(21);
    const ModelGeometry g{32, 32};
    std::vector<double> v(g.size());
    for (auto& x : v) x = rng.unit() < 0.3 ? 0.0 : rng.unit();
    v[5] = 1.0 / 3.0;
    v[6] = 1e-17;
    const auto m = matrix(g, v);
    std::ostringstream out;
    const std::vector<std::string> comments = {"input x sha256=00"};
    emit_heatmap_csv(m, out, comments);
    const auto text = out.str();
    CHECK(text.starts_with("# input x sha256=00\n"));
    const auto grid = parse_heatmap_csv(text);
    REQUIRE(grid.size() == 32);
    for (std::size_t l = 0; l < 32; ++l) {
        REQUIRE(grid[l].size() == 32);
        for (std::size_t h = 0; h < 32; ++h) CHECK(grid[l][h] == m.at(l, h));
    }
    CHECK_THROWS(parse_heatmap_csv("1,2\n3\n"));
}

TEST_CASE("heatmap SVG: layers are rows, heads are columns") {
    const ModelGeometry g{3, 5};
    std::vector<double> v(g.size(), 0.0);
    v[HeadId{2, 1}.flat(g)] = 0.8;
    const auto m = matrix(g, v);
    std::ostringstream out;
    emit_heatmap_svg(m, out, "t<1>");
    const std::string svg = out.str();
    CHECK(svg.find("<title>t&lt;1&gt;</title>") != std::string::npos);

    const std::regex cell(R"re(<rect class="cell" data-layer="(\d+)" data-head="(\d+)" x="(\d+)" y="(\d+)"[^>]*fill="([^"]+)")re");
    std::size_t n = 0, hot = 0;
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), cell); it != std::sregex_iterator(); ++it) {
        const int layer = std::stoi((*it)[1]), head = std::stoi((*it)[2]);
        const int x = std::stoi((*it)[3]), y = std::stoi((*it)[4]);
        CHECK(x == 40 + head * 14);
        CHECK(y == 40 + layer * 14);
        if ((*it)[5].str() != kHeatmapBackground) {
            ++hot;
            CHECK(layer == 2);
            CHECK(head == 1);
        }
        ++n;
    }
    CHECK(n == 15);
    CHECK(hot == 1);
    for (double x : {1e-12, 0.3, 1.0}) CHECK(heatmap_color(x, 1.0) != kHeatmapBackground);
    CHECK(heatmap_color(0.0, 1.0) == kHeatmapBackground);
}
