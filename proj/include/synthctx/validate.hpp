#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "synthctx/core.hpp"
#include "synthctx/tokenizer.hpp"

namespace synthctx {

struct Violation {
    std::string code;
    std::string detail;
};

struct ValidationLimits {
    // When set, the assembled context must fit in token_budget under counter.
    std::optional<std::size_t> token_budget;
    TokenCounter counter;
    // Required hop count for musique examples; symbolic musique examples
    // derive it from their query when unset.
    std::optional<std::size_t> hops;
};

// Checks every Example/Document/NeedleSpan invariant and, for symbolic
// variants, the stored answer against the symbolic oracle. Never throws for
// bad data; the returned list is empty for a valid example.
std::vector<Violation> validate_example(const Example& ex, const ValidationLimits& limits = {});

}  // namespace synthctx
