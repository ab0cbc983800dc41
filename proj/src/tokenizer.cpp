#include "synthctx/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "synthctx/error.hpp"
#include "synthctx/hash.hpp"

namespace synthctx {

struct Vocabulary {
    std::unordered_set<std::string> tokens;
    std::size_t max_len = 0;
};

namespace {

bool is_space(unsigned char c) noexcept {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::shared_ptr<const Vocabulary> load_vocabulary(const TokenizerSpec& spec,
                                                  const std::filesystem::path& path) {
    std::string content;
    try {
        content = read_file(path);
    } catch (const IoError& e) {
        throw ConfigError(std::string("external vocabulary unavailable: ") + e.what());
    }
    if (sha256_hex(content) != *spec.vocab_ref) {
        throw ConfigError("external vocabulary '" + path.string() + "' does not match vocab_ref");
    }
    auto vocab = std::make_shared<Vocabulary>();
    std::size_t start = 0;
    while (start <= content.size()) {
        std::size_t end = content.find('\n', start);
        if (end == std::string::npos) end = content.size();
        std::string_view line(content.data() + start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) {
            vocab->max_len = std::max(vocab->max_len, line.size());
            vocab->tokens.emplace(line);
        }
        start = end + 1;
    }
    if (vocab->tokens.empty()) throw ConfigError("external vocabulary '" + path.string() + "' is empty");
    return vocab;
}

}  // namespace

std::size_t whitespace_runs(std::string_view text) noexcept {
    std::size_t runs = 0;
    bool in_run = false;
    for (unsigned char c : text) {
        if (is_space(c)) {
            in_run = false;
        } else if (!in_run) {
            in_run = true;
            ++runs;
        }
    }
    return runs;
}

TokenCounter::TokenCounter(TokenizerSpec spec) : spec_(std::move(spec)) {
    check_tokenizer_spec(spec_);
    if (spec_.mode == TokenizerMode::external_vocab) {
        throw ConfigError("external-vocab tokenizer needs a vocabulary file");
    }
}

TokenCounter::TokenCounter(TokenizerSpec spec, const std::filesystem::path& vocab_path)
    : spec_(std::move(spec)) {
    check_tokenizer_spec(spec_);
    if (spec_.mode == TokenizerMode::external_vocab) vocab_ = load_vocabulary(spec_, vocab_path);
}

std::size_t TokenCounter::count(std::string_view text) const {
    switch (spec_.mode) {
        case TokenizerMode::whitespace_approx: {
            const std::size_t runs = whitespace_runs(text);
            if (spec_.calibration == 1.0) return runs;
            return static_cast<std::size_t>(std::ceil(static_cast<double>(runs) * spec_.calibration));
        }
        case TokenizerMode::byte_count:
            return text.size();
        case TokenizerMode::external_vocab: {
            if (!vocab_) throw ConfigError("external-vocab tokenizer has no vocabulary loaded");
            // Greedy longest match; bytes not covered by any entry count as one token each.
            std::size_t n = 0;
            std::size_t pos = 0;
            std::string key;
            while (pos < text.size()) {
                std::size_t len = std::min(vocab_->max_len, text.size() - pos);
                for (; len > 1; --len) {
                    key.assign(text.substr(pos, len));
                    if (vocab_->tokens.contains(key)) break;
                }
                pos += len;
                ++n;
            }
            return n;
        }
    }
    return 0;
}

std::size_t token_count(std::string_view text, const TokenizerSpec& spec) {
    return TokenCounter(spec).count(text);
}

std::size_t context_token_count(std::span<const Document> docs, const TokenCounter& counter) {
    std::size_t total = 0;
    for (const auto& d : docs) total += counter.count(d.body);
    return total;
}

}  // namespace synthctx
