#include "synthctx/eval.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>

#include <json.hpp>

#include "synthctx/dataset_io.hpp"
#include "synthctx/error.hpp"
#include "synthctx/hash.hpp"
#include "synthctx/rng.hpp"

namespace synthctx {

namespace {

bool is_article(std::string_view w) { return w == "a" || w == "an" || w == "the"; }

void check_pair(std::span<const double> a, std::span<const double> b, std::size_t n_resamples) {
    if (a.size() != b.size()) {
        throw ValidationError("paired bootstrap: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                              " scores");
    }
    if (a.size() < 2) throw ValidationError("paired bootstrap needs at least two examples");
    if (n_resamples < 1) throw ValidationError("paired bootstrap needs at least one resample");
}

std::vector<double> differences(std::span<const double> a, std::span<const double> b) {
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return d;
}

// 1 when resample r has a non-positive summed difference.
int resample_nonpositive(const std::vector<double>& d, std::uint64_t seed, std::size_t r) {
    Rng rng(derive_seed(seed, r));
    double sum = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) sum += d[rng.below(d.size())];
    return sum <= 0.0 ? 1 : 0;
}

BootstrapResult finish(std::span<const double> a, std::span<const double> b, std::size_t n_resamples,
                       std::uint64_t seed, std::size_t count) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    return {n_resamples, seed, ma - mb, static_cast<double>(count) / static_cast<double>(n_resamples)};
}

}  // namespace

std::string normalize_answer(std::string_view text) {
    std::string cleaned;
    cleaned.reserve(text.size());
    for (char c : text) {
        const auto u = static_cast<unsigned char>(c);
        if (std::ispunct(u)) continue;
        cleaned += static_cast<char>(std::tolower(u));
    }
    std::string out;
    std::size_t i = 0;
    while (i < cleaned.size()) {
        while (i < cleaned.size() && std::isspace(static_cast<unsigned char>(cleaned[i]))) ++i;
        std::size_t j = i;
        while (j < cleaned.size() && !std::isspace(static_cast<unsigned char>(cleaned[j]))) ++j;
        if (j > i) {
            const std::string_view w(cleaned.data() + i, j - i);
            if (!is_article(w)) {
                if (!out.empty()) out += ' ';
                out.append(w);
            }
        }
        i = j;
    }
    return out;
}

std::vector<std::string> answer_tokens(std::string_view text) {
    const std::string norm = normalize_answer(text);
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < norm.size()) {
        std::size_t j = norm.find(' ', i);
        if (j == std::string::npos) j = norm.size();
        out.emplace_back(norm.substr(i, j - i));
        i = j + 1;
    }
    return out;
}

double token_f1(std::string_view pred, std::string_view gold) {
    const auto p = answer_tokens(pred);
    const auto g = answer_tokens(gold);
    if (p.empty() && g.empty()) return 1.0;
    if (p.empty() || g.empty()) return 0.0;
    std::map<std::string, std::size_t> counts;
    for (const auto& t : g) ++counts[t];
    std::size_t common = 0;
    for (const auto& t : p) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0) return 0.0;
    const double precision = static_cast<double>(common) / static_cast<double>(p.size());
    const double rec = static_cast<double>(common) / static_cast<double>(g.size());
    return 2.0 * precision * rec / (precision + rec);
}

double citation_f1(const std::set<std::int64_t>& pred, const std::set<std::int64_t>& gold) {
    if (pred.empty() && gold.empty()) return 1.0;
    if (pred.empty() || gold.empty()) return 0.0;
    std::size_t common = 0;
    for (auto x : pred) common += gold.contains(x) ? 1 : 0;
    if (common == 0) return 0.0;
    const double precision = static_cast<double>(common) / static_cast<double>(pred.size());
    const double rec = static_cast<double>(common) / static_cast<double>(gold.size());
    return 2.0 * precision * rec / (precision + rec);
}

std::set<std::int64_t> parse_citation_answer(std::string_view text) {
    std::set<std::int64_t> out;
    std::size_t i = 0;
    while ((i = text.find('[', i)) != std::string_view::npos) {
        std::size_t j = i + 1;
        while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i + 1 && j < text.size() && text[j] == ']' && j - i - 1 <= 18) {
            out.insert(std::stoll(std::string(text.substr(i + 1, j - i - 1))));
            i = j + 1;
        } else {
            ++i;
        }
    }
    return out;
}

double example_score(Task task, std::string_view pred, std::string_view gold) {
    if (task == Task::summhay_cite) return citation_f1(parse_citation_answer(pred), parse_citation_answer(gold));
    return token_f1(pred, gold);
}

std::string serialize_prediction(const PredictionRecord& r) {
    ordered_json j;
    j["example_id"] = r.example_id;
    j["prediction_text"] = r.prediction_text;
    j["gold_text"] = r.gold_text;
    j["score"] = r.score ? ordered_json(*r.score) : ordered_json(nullptr);
    return dump_line(j);
}

PredictionRecord parse_prediction(std::string_view line) {
    PredictionRecord r;
    try {
        const json j = json::parse(line);
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (it.key() != "example_id" && it.key() != "prediction_text" && it.key() != "gold_text" &&
                it.key() != "score") {
                throw ParseError("prediction record: unknown field '" + it.key() + "'");
            }
        }
        r.example_id = j.at("example_id").get<std::string>();
        r.prediction_text = j.at("prediction_text").get<std::string>();
        r.gold_text = j.at("gold_text").get<std::string>();
        if (j.contains("score") && !j["score"].is_null()) r.score = j["score"].get<double>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("prediction record: ") + e.what());
    }
    return r;
}

void write_predictions(const std::filesystem::path& path, std::span<const PredictionRecord> records) {
    std::string out;
    for (const auto& r : records) out += serialize_prediction(r) + "\n";
    write_file(path, out);
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
    const std::string content = read_file(path);
    std::vector<PredictionRecord> out;
    std::size_t lineno = 0;
    for (auto line : split_lines(content)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(parse_prediction(line));
        } catch (const ParseError& e) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

double corpus_f1(std::span<PredictionRecord> records, Task task) {
    if (records.empty()) throw ValidationError("corpus F1 over zero predictions");
    double sum = 0.0;
    for (auto& r : records) {
        r.score = example_score(task, r.prediction_text, r.gold_text);
        sum += *r.score;
    }
    return sum / static_cast<double>(records.size());
}

double corpus_f1(std::span<const PredictionRecord> records, Task task) {
    if (records.empty()) throw ValidationError("corpus F1 over zero predictions");
    double sum = 0.0;
    for (const auto& r : records) sum += example_score(task, r.prediction_text, r.gold_text);
    return sum / static_cast<double>(records.size());
}

BootstrapResult paired_bootstrap(std::span<const double> a, std::span<const double> b, std::size_t n_resamples,
                                 std::uint64_t seed) {
    check_pair(a, b, n_resamples);
    const auto d = differences(a, b);
    const auto n = static_cast<std::ptrdiff_t>(n_resamples);
    std::size_t count = 0;
#pragma omp parallel for reduction(+ : count) schedule(static)
    for (std::ptrdiff_t r = 0; r < n; ++r) count += resample_nonpositive(d, seed, static_cast<std::size_t>(r));
    return finish(a, b, n_resamples, seed, count);
}

BootstrapResult paired_bootstrap_serial(std::span<const double> a, std::span<const double> b,
                                        std::size_t n_resamples, std::uint64_t seed) {
    check_pair(a, b, n_resamples);
    const auto d = differences(a, b);
    std::size_t count = 0;
    for (std::size_t r = 0; r < n_resamples; ++r) count += resample_nonpositive(d, seed, r);
    return finish(a, b, n_resamples, seed, count);
}

}  // namespace synthctx
