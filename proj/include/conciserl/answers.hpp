#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace conciserl {

/// Extracts the contents of the last `\boxed{...}` in `text`, matching
/// braces so nested groups like `\boxed{\frac{1}{2}}` come back verbatim.
/// Returns nullopt when no `\boxed{` is present or its braces never close.
std::optional<std::string> extract_boxed_answer(std::string_view text);

/// Canonical form used for answer comparison: trim outer whitespace,
/// strip one enclosing `$...$` pair, collapse internal whitespace runs
/// to a single space. No symbolic or LaTeX equivalence is attempted.
std::string normalize_answer(std::string_view answer);

/// Binary accuracy signal: 1 iff the extracted answer matches the gold
/// answer after normalization, 0 otherwise (including missing answers).
int accuracy(const std::optional<std::string>& trace_answer, std::string_view gold);

} // namespace conciserl
