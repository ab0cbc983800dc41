#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "synthctx/core.hpp"

// Answer scoring and paired bootstrap significance tests.
namespace synthctx {

// Lowercase (ASCII), drop punctuation, drop the articles a/an/the, collapse
// whitespace.
std::string normalize_answer(std::string_view text);
std::vector<std::string> answer_tokens(std::string_view text);

// F1 over normalized token multisets. Both empty → 1, one empty → 0.
double token_f1(std::string_view pred, std::string_view gold);

// Set-overlap F1. Both empty → 1.
double citation_f1(const std::set<std::int64_t>& pred, const std::set<std::int64_t>& gold);

// Every "[n]" integer in the text.
std::set<std::int64_t> parse_citation_answer(std::string_view text);

// Per-example score under the task's metric.
double example_score(Task task, std::string_view pred, std::string_view gold);

struct PredictionRecord {
    std::string example_id;
    std::string prediction_text;
    std::string gold_text;
    std::optional<double> score;

    friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

std::string serialize_prediction(const PredictionRecord& r);
PredictionRecord parse_prediction(std::string_view line);
void write_predictions(const std::filesystem::path& path, std::span<const PredictionRecord> records);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

// Fills in every record's score and returns their mean. ValidationError when
// empty.
double corpus_f1(std::span<PredictionRecord> records, Task task);
double corpus_f1(std::span<const PredictionRecord> records, Task task);

struct BootstrapResult {
    std::size_t n_resamples = 0;
    std::uint64_t seed = 0;
    double mean_diff = 0.0;  // mean(a) - mean(b) on the full sample
    double p_value = 0.0;    // share of resamples with diff <= 0

    friend bool operator==(const BootstrapResult&, const BootstrapResult&) = default;
};

inline constexpr std::size_t kDefaultResamples = 10000;

// Resample r draws n indices with replacement from stream derive_seed(seed, r)
// and sums a_i - b_i over them. The OpenMP kernel and the serial reference
// count the same resamples, so their results are identical.
BootstrapResult paired_bootstrap(std::span<const double> a, std::span<const double> b,
                                 std::size_t n_resamples = kDefaultResamples, std::uint64_t seed = 0);
BootstrapResult paired_bootstrap_serial(std::span<const double> a, std::span<const double> b,
                                        std::size_t n_resamples = kDefaultResamples, std::uint64_t seed = 0);

}  // namespace synthctx
