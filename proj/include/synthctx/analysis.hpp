#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "synthctx/scoring.hpp"

// Comparisons between head sets and score matrices, intervention planning
// and heatmap output.
namespace synthctx {

// |A ∩ B| / |B|. UndefinedMetricError when B is empty; ValidationError on a
// geometry mismatch.
double recall(const HeadSet& a, const HeadSet& b);
std::size_t intersection_size(const HeadSet& a, const HeadSet& b);

// Cosine of the two layer-major grids. UndefinedMetricError when either is
// all zero.
double cosine(const ScoreMatrix& m1, const ScoreMatrix& m2);
double cosine(std::span<const double> x, std::span<const double> y);

// 1-based ranks; tied values share the mean of their ranks.
std::vector<double> average_ranks(std::span<const double> xs);
double pearson(std::span<const double> xs, std::span<const double> ys);
// Pearson over average ranks. UndefinedMetricError for constant input.
double spearman(std::span<const double> xs, std::span<const double> ys);

enum class PlanKind { mask_topk, mask_random, patch_intersection, patch_complement, patch_random };

std::string_view to_string(PlanKind k) noexcept;
PlanKind parse_plan_kind(std::string_view s);

struct PlanProvenance {
    std::string real_dataset_id;  // source of the scores for mask plans
    std::optional<std::string> synth_dataset_id;
    std::optional<std::size_t> k;
    std::vector<std::string> input_sha256;  // score files the plan was derived from

    friend bool operator==(const PlanProvenance&, const PlanProvenance&) = default;
};

struct InterventionPlan {
    PlanKind kind = PlanKind::mask_topk;
    ModelGeometry geometry;
    std::vector<HeadId> heads;
    std::size_t n_heads = 0;
    std::uint64_t seed = 0;
    PlanProvenance provenance;
    std::optional<std::string> warning;

    friend bool operator==(const InterventionPlan&, const InterventionPlan&) = default;
};

// Throws ValidationError unless |heads| == n_heads, heads are distinct and
// inside the geometry.
void check_plan(const InterventionPlan& p);

struct PatchPlans {
    InterventionPlan intersection;
    InterventionPlan complement;
    InterventionPlan random;
};

// inter = real ∩ synth, compl = real \ synth, n = min(|compl|, |inter|).
// n heads are drawn without replacement from each source and from the full
// geometry. When n = 0 all plans are empty and carry a warning.
PatchPlans plan_patch_sets(const HeadSet& real, const HeadSet& synth, std::uint64_t seed,
                           const std::string& real_id = {}, const std::string& synth_id = {});

// The k highest-scoring heads (ties in canonical order) followed by
// `random_trials` plans of k distinct uniformly drawn heads.
std::vector<InterventionPlan> plan_topk_mask(const ScoreMatrix& m, std::size_t k, std::uint64_t seed,
                                             std::size_t random_trials = 3);

// Plan file: one JSON record per line.
std::string serialize_plan(const InterventionPlan& p);
InterventionPlan parse_plan(std::string_view line);
void write_plans(const std::filesystem::path& path, std::span<const InterventionPlan> plans);
std::vector<InterventionPlan> read_plans(const std::filesystem::path& path);

// CSV: one row per layer, one column per head, %.17g, no header. Optional
// "# " comment lines come first; the parser skips them.
std::size_t emit_heatmap_csv(const ScoreMatrix& m, std::ostream& out, std::span<const std::string> comments = {});
std::vector<std::vector<double>> parse_heatmap_csv(std::string_view content);

// SVG grid, layer rows top to bottom, head columns left to right. Zero cells
// use kHeatmapBackground; positive values never do.
inline constexpr std::string_view kHeatmapBackground = "#ffffff";
std::size_t emit_heatmap_svg(const ScoreMatrix& m, std::ostream& out, const std::string& title = {});
std::string heatmap_color(double value, double max_value);

}  // namespace synthctx
