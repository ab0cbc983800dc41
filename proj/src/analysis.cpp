#include "synthctx/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "synthctx/dataset_io.hpp"
#include "synthctx/error.hpp"
#include "synthctx/hash.hpp"
#include "synthctx/rng.hpp"

namespace synthctx {

namespace {

void same_geometry(const ModelGeometry& a, const ModelGeometry& b, const char* what) {
    if (a != b) {
        throw ValidationError(std::string(what) + ": geometry mismatch (" + std::to_string(a.n_layers) + "x" +
                              std::to_string(a.n_heads) + " vs " + std::to_string(b.n_layers) + "x" +
                              std::to_string(b.n_heads) + ")");
    }
}

std::vector<HeadId> sample_heads(const std::vector<HeadId>& source, std::size_t n, Rng& rng) {
    std::vector<HeadId> out;
    for (std::size_t i : rng.sample_indices(source.size(), n)) out.push_back(source[i]);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<HeadId> all_heads(const ModelGeometry& g) {
    std::vector<HeadId> out;
    out.reserve(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) out.push_back(HeadId::from_flat(i, g));
    return out;
}

std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::size_t intersection_size(const HeadSet& a, const HeadSet& b) {
    same_geometry(a.geometry, b.geometry, "recall");
    std::size_t n = 0;
    for (const auto& h : a.members) n += b.members.contains(h) ? 1 : 0;
    return n;
}

double recall(const HeadSet& a, const HeadSet& b) {
    const std::size_t inter = intersection_size(a, b);
    if (b.empty()) throw UndefinedMetricError("recall against an empty head set is undefined");
    return static_cast<double>(inter) / static_cast<double>(b.size());
}

double cosine(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ValidationError("cosine: length mismatch");
    double dot = 0.0, nx = 0.0, ny = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        dot += x[i] * y[i];
        nx += x[i] * x[i];
        ny += y[i] * y[i];
    }
    if (nx == 0.0 || ny == 0.0) throw UndefinedMetricError("cosine with an all-zero vector is undefined");
    return std::clamp(dot / (std::sqrt(nx) * std::sqrt(ny)), -1.0, 1.0);
}

double cosine(const ScoreMatrix& m1, const ScoreMatrix& m2) {
    same_geometry(m1.geometry, m2.geometry, "cosine");
    return cosine(m1.values, m2.values);
}

std::vector<double> average_ranks(std::span<const double> xs) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(xs.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw ValidationError("correlation: length mismatch");
    if (xs.size() < 2) throw ValidationError("correlation needs at least two points");
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw UndefinedMetricError("correlation with a constant sequence is undefined");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw ValidationError("spearman: length mismatch");
    const auto rx = average_ranks(xs);
    const auto ry = average_ranks(ys);
    return pearson(rx, ry);
}

std::string_view to_string(PlanKind k) noexcept {
    switch (k) {
        case PlanKind::mask_topk: return "mask-topk";
        case PlanKind::mask_random: return "mask-random";
        case PlanKind::patch_intersection: return "patch-intersection";
        case PlanKind::patch_complement: return "patch-complement";
        case PlanKind::patch_random: return "patch-random";
    }
    return "?";
}

PlanKind parse_plan_kind(std::string_view s) {
    for (auto k : {PlanKind::mask_topk, PlanKind::mask_random, PlanKind::patch_intersection,
                   PlanKind::patch_complement, PlanKind::patch_random}) {
        if (to_string(k) == s) return k;
    }
    throw ParseError("unknown plan kind '" + std::string(s) + "'");
}

void check_plan(const InterventionPlan& p) {
    if (p.heads.size() != p.n_heads) {
        throw ValidationError("plan lists " + std::to_string(p.heads.size()) + " heads but declares " +
                              std::to_string(p.n_heads));
    }
    std::set<HeadId> seen;
    for (const auto& h : p.heads) {
        if (!h.within(p.geometry)) throw ValidationError("plan head outside geometry");
        if (!seen.insert(h).second) throw ValidationError("plan lists a head twice");
    }
}

PatchPlans plan_patch_sets(const HeadSet& real, const HeadSet& synth, std::uint64_t seed, const std::string& real_id,
                           const std::string& synth_id) {
    same_geometry(real.geometry, synth.geometry, "plan_patch_sets");
    const ModelGeometry g = real.geometry;
    std::vector<HeadId> inter, compl_;
    for (const auto& h : real.members) (synth.contains(h) ? inter : compl_).push_back(h);
    const std::size_t n = std::min(inter.size(), compl_.size());

    auto make = [&](PlanKind kind, std::vector<HeadId> heads) {
        InterventionPlan p;
        p.kind = kind;
        p.geometry = g;
        p.heads = std::move(heads);
        p.n_heads = p.heads.size();
        p.seed = seed;
        p.provenance = {real_id, synth_id, std::nullopt, {}};
        if (n == 0) {
            p.warning = "no heads to patch: |intersection| = " + std::to_string(inter.size()) +
                        ", |complement| = " + std::to_string(compl_.size());
        }
        return p;
    };

    Rng r_inter(derive_seed(seed, 0));
    Rng r_compl(derive_seed(seed, 1));
    Rng r_rand(derive_seed(seed, 2));
    PatchPlans out;
    out.intersection = make(PlanKind::patch_intersection, sample_heads(inter, n, r_inter));
    out.complement = make(PlanKind::patch_complement, sample_heads(compl_, n, r_compl));
    out.random = make(PlanKind::patch_random, sample_heads(all_heads(g), n, r_rand));
    return out;
}

std::vector<InterventionPlan> plan_topk_mask(const ScoreMatrix& m, std::size_t k, std::uint64_t seed,
                                             std::size_t random_trials) {
    const ModelGeometry g = m.geometry;
    if (k < 1 || k > g.size()) {
        throw ValidationError("k must lie in [1, " + std::to_string(g.size()) + "], got " + std::to_string(k));
    }
    std::vector<std::size_t> order(g.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return m.values[a] > m.values[b]; });

    auto make = [&](PlanKind kind, std::vector<HeadId> heads) {
        InterventionPlan p;
        p.kind = kind;
        p.geometry = g;
        p.heads = std::move(heads);
        p.n_heads = p.heads.size();
        p.seed = seed;
        p.provenance = {m.dataset_id, std::nullopt, k, {}};
        return p;
    };

    std::vector<InterventionPlan> out;
    std::vector<HeadId> top;
    for (std::size_t i = 0; i < k; ++i) top.push_back(HeadId::from_flat(order[i], g));
    out.push_back(make(PlanKind::mask_topk, std::move(top)));
    const auto everyone = all_heads(g);
    for (std::size_t t = 0; t < random_trials; ++t) {
        Rng rng(derive_seed(seed, t));
        out.push_back(make(PlanKind::mask_random, sample_heads(everyone, k, rng)));
    }
    return out;
}

std::string serialize_plan(const InterventionPlan& p) {
    check_plan(p);
    ordered_json j;
    j["kind"] = to_string(p.kind);
    j["n_layers"] = p.geometry.n_layers;
    j["n_heads_per_layer"] = p.geometry.n_heads;
    ordered_json heads = ordered_json::array();
    for (const auto& h : p.heads) heads.push_back({h.layer, h.head});
    j["heads"] = std::move(heads);
    j["n_heads"] = p.n_heads;
    j["seed"] = p.seed;
    ordered_json prov;
    prov["real_dataset_id"] = p.provenance.real_dataset_id;
    prov["synth_dataset_id"] = p.provenance.synth_dataset_id ? ordered_json(*p.provenance.synth_dataset_id)
                                                             : ordered_json(nullptr);
    prov["k"] = p.provenance.k ? ordered_json(*p.provenance.k) : ordered_json(nullptr);
    prov["input_sha256"] = p.provenance.input_sha256;
    j["provenance"] = std::move(prov);
    j["warning"] = p.warning ? ordered_json(*p.warning) : ordered_json(nullptr);
    return dump_line(j);
}

InterventionPlan parse_plan(std::string_view line) {
    InterventionPlan p;
    try {
        const json j = json::parse(line);
        p.kind = parse_plan_kind(j.at("kind").get<std::string>());
        p.geometry = {j.at("n_layers").get<std::size_t>(), j.at("n_heads_per_layer").get<std::size_t>()};
        for (const auto& h : j.at("heads")) {
            if (!h.is_array() || h.size() != 2) throw ParseError("plan heads must be [layer, head] pairs");
            p.heads.push_back({h[0].get<std::size_t>(), h[1].get<std::size_t>()});
        }
        p.n_heads = j.at("n_heads").get<std::size_t>();
        p.seed = j.at("seed").get<std::uint64_t>();
        const json& prov = j.at("provenance");
        p.provenance.real_dataset_id = prov.at("real_dataset_id").get<std::string>();
        if (!prov.at("synth_dataset_id").is_null()) p.provenance.synth_dataset_id = prov["synth_dataset_id"];
        if (!prov.at("k").is_null()) p.provenance.k = prov["k"].get<std::size_t>();
        if (prov.contains("input_sha256")) {
            p.provenance.input_sha256 = prov["input_sha256"].get<std::vector<std::string>>();
        }
        if (!j.at("warning").is_null()) p.warning = j["warning"].get<std::string>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("plan record: ") + e.what());
    }
    check_plan(p);
    return p;
}

void write_plans(const std::filesystem::path& path, std::span<const InterventionPlan> plans) {
    std::string out;
    for (const auto& p : plans) out += serialize_plan(p) + "\n";
    write_file(path, out);
}

std::vector<InterventionPlan> read_plans(const std::filesystem::path& path) {
    const std::string content = read_file(path);
    std::vector<InterventionPlan> out;
    std::size_t lineno = 0;
    for (auto line : split_lines(content)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(parse_plan(line));
        } catch (const Error& e) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::size_t emit_heatmap_csv(const ScoreMatrix& m, std::ostream& out, std::span<const std::string> comments) {
    std::string s;
    for (const auto& c : comments) s += "# " + c + "\n";
    for (std::size_t l = 0; l < m.geometry.n_layers; ++l) {
        for (std::size_t h = 0; h < m.geometry.n_heads; ++h) {
            if (h > 0) s += ',';
            s += fmt17(m.at(l, h));
        }
        s += '\n';
    }
    out << s;
    if (!out) throw IoError("heatmap write failed");
    return s.size();
}

std::vector<std::vector<double>> parse_heatmap_csv(std::string_view content) {
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 0;
    for (auto line : split_lines(content)) {
        ++lineno;
        if (line.empty() || line.front() == '#') continue;
        std::vector<double> row;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            std::size_t comma = line.find(',', pos);
            if (comma == std::string_view::npos) comma = line.size();
            const std::string cell(line.substr(pos, comma - pos));
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (cell.empty() || end != cell.c_str() + cell.size()) {
                throw ParseError("heatmap csv line " + std::to_string(lineno) + ": bad number '" + cell + "'");
            }
            row.push_back(v);
            pos = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw ParseError("heatmap csv line " + std::to_string(lineno) + ": ragged row");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string heatmap_color(double value, double max_value) {
    if (!(value > 0.0)) return std::string(kHeatmapBackground);
    const double t = max_value > 0.0 ? std::clamp(value / max_value, 0.0, 1.0) : 1.0;
    // Pale yellow to dark red; the low end stays visibly off-white.
    const auto lerp = [t](int a, int b) { return static_cast<int>(std::lround(a + (b - a) * t)); };
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", lerp(255, 128), lerp(230, 0), lerp(150, 38));
    return buf;
}

std::size_t emit_heatmap_svg(const ScoreMatrix& m, std::ostream& out, const std::string& title) {
    constexpr int cell = 14;
    constexpr int left = 40;
    constexpr int top = 40;
    const auto L = static_cast<int>(m.geometry.n_layers);
    const auto H = static_cast<int>(m.geometry.n_heads);
    const double max_value = m.values.empty() ? 0.0 : *std::max_element(m.values.begin(), m.values.end());
    const int width = left + H * cell + 20;
    const int height = top + L * cell + 20;

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    if (!title.empty()) {
        std::string esc;
        for (char c : title) {
            if (c == '<') esc += "&lt;";
            else if (c == '>') esc += "&gt;";
            else if (c == '&') esc += "&amp;";
            else esc += c;
        }
        s << "<title>" << esc << "</title>\n";
    }
    s << "<text x=\"" << left << "\" y=\"14\" font-size=\"11\">head</text>\n";
    s << "<text x=\"4\" y=\"" << top - 4 << "\" font-size=\"11\">layer</text>\n";
    for (int l = 0; l < L; ++l) {
        for (int h = 0; h < H; ++h) {
            const double v = m.at(static_cast<std::size_t>(l), static_cast<std::size_t>(h));
            s << "<rect class=\"cell\" data-layer=\"" << l << "\" data-head=\"" << h << "\" x=\"" << left + h * cell
              << "\" y=\"" << top + l * cell << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\""
              << heatmap_color(v, max_value) << "\" stroke=\"#dddddd\"><title>" << fmt17(v) << "</title></rect>\n";
        }
    }
    s << "</svg>\n";
    const std::string text = s.str();
    out << text;
    if (!out) throw IoError("heatmap write failed");
    return text.size();
}

}  // namespace synthctx
