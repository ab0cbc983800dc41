#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "synthctx/augment.hpp"
#include "synthctx/core.hpp"
#include "synthctx/dataset_io.hpp"
#include "synthctx/symbolic.hpp"
#include "synthctx/templates.hpp"
#include "synthctx/tokenizer.hpp"

// Dataset generation: one entry point that dispatches every (task, variant)
// pair to the symbolic, templated or backend-assisted builders.
namespace synthctx {

// Source material for the non-symbolic variants. Exactly the fields of the
// example's task are used.
struct QaSeed {  // mdqa
    std::string question;
    std::string answer;
    std::vector<std::string> entities;
    std::string sentence;  // the claim combining question and answer
    std::optional<std::string> title;
};

struct ChainSeed {  // musique
    std::vector<templates::KnowledgeTriple> triples;
    std::string question;
    std::string answer;
    std::vector<std::string> entities;
};

struct InsightSeed {  // summhay-cite
    std::string insight;
    std::vector<std::string> distractor_insights;
};

struct SeedRecord {
    QaSeed qa;
    ChainSeed chain;
    InsightSeed insight;
};

// Fictional seed material drawn from `seed`; names are syllable soup so no
// real-world entity is implied.
SeedRecord builtin_seed(Task task, std::uint64_t seed, std::size_t hops = 3);

// Seed file: one JSON object per line, schema per task (see README).
std::vector<SeedRecord> read_seed_file(const std::filesystem::path& path, Task task);

struct GenConfig {
    Task task = Task::mdqa;
    Variant variant;
    std::size_t count = 1;
    std::uint64_t master_seed = 0;
    std::size_t token_budget = 4096;
    TokenizerSpec tokenizer;
    std::optional<std::filesystem::path> vocab_path;
    std::string dataset_id;
    std::optional<std::string> created_at;

    // symbolic knobs
    std::size_t hops = 3;
    std::optional<std::size_t> kv_pairs;
    symbolic::KeyKind key_kind = symbolic::KeyKind::atom;
    std::optional<std::size_t> n_dictionaries;
    std::size_t entries_per_dictionary = 4;
    std::size_t n_lists = 10;
    std::size_t items_per_list = 180;
    std::string alphabet{symbolic::kDefaultAlphabet};

    // templated / backend-assisted knobs
    std::optional<std::size_t> n_documents;  // default 10 (mdqa, summhay-cite) or 20 (musique)
    std::vector<SeedRecord> seeds;           // empty: builtin_seed per example
    std::vector<Document> distractor_pool;
    bool symbolize_distractors = false;
    templates::PaddingSpec padding;

    // 0 keeps the OpenMP default.
    std::size_t threads = 0;

    std::size_t documents() const noexcept;
};

inline constexpr std::size_t kDefaultCountMdqa = 1400;
inline constexpr std::size_t kDefaultCountMusique = 400;
inline constexpr std::size_t kDefaultCountSummhay = 400;

std::size_t default_count(Task task) noexcept;
std::string default_dataset_id(Task task, const Variant& v, std::uint64_t master_seed);

// Throws ConfigError / ValidationError for unusable configurations before any
// example is built.
void check_gen_config(const GenConfig& cfg, bool have_backend);

// Example `index` of the dataset. Pure in (cfg, index) given the augmenter's
// cache contents. Every returned example passes validate_example.
Example generate_example(const GenConfig& cfg, std::size_t index, const TokenCounter& counter,
                         augment::Augmenter* augmenter = nullptr);

// All examples, OpenMP-parallel over the example index; output order is the
// index order whatever the schedule.
Dataset generate_dataset(const GenConfig& cfg, augment::Augmenter* augmenter = nullptr);
// Plain loop over the same per-example function.
Dataset generate_dataset_serial(const GenConfig& cfg, augment::Augmenter* augmenter = nullptr);

// Number of trailing examples that go to the validation split.
std::size_t validation_count(std::size_t count, double fraction = 0.1) noexcept;

}  // namespace synthctx
