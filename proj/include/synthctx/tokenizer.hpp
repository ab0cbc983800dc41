#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>

#include "synthctx/core.hpp"

namespace synthctx {

struct Vocabulary;

// Counts tokens under a TokenizerSpec. Whitespace and byte modes need no
// state; external-vocab mode holds the loaded vocabulary, whose file content
// must hash to spec.vocab_ref.
//
// Copies share the immutable vocabulary, so a counter may be passed by value
// to worker threads.
class TokenCounter {
  public:
    TokenCounter() = default;
    explicit TokenCounter(TokenizerSpec spec);
    TokenCounter(TokenizerSpec spec, const std::filesystem::path& vocab_path);

    std::size_t count(std::string_view text) const;
    const TokenizerSpec& spec() const noexcept { return spec_; }

  private:
    TokenizerSpec spec_;
    std::shared_ptr<const Vocabulary> vocab_;
};

// Convenience wrapper for the stateless modes; external-vocab throws
// ConfigError because it needs a loaded vocabulary.
std::size_t token_count(std::string_view text, const TokenizerSpec& spec);

// Number of maximal non-whitespace runs.
std::size_t whitespace_runs(std::string_view text) noexcept;

// Budgeted size of an assembled context: sum of document body counts.
std::size_t context_token_count(std::span<const Document> docs, const TokenCounter& counter);

}  // namespace synthctx
