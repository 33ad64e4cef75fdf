#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "conciserl/metrics.hpp"

namespace conciserl::records {

/// One benchmark problem. Level is the MATH-style difficulty 1..5 when the
/// dataset provides it.
struct ProblemRecord {
    std::string id;
    std::string prompt;
    std::string answer;
    std::optional<int> level;
    std::string dataset;
};

/// One recorded trace. Fields are optional per token scheme: a missing
/// `correct` is resolved by extracting and comparing the boxed answer, a
/// missing `token_count` by the approx counter over `trace_text`.
struct TraceRecord {
    std::string id;
    std::optional<std::string> trace_text;
    std::optional<long> token_count;
    std::optional<int> correct;
};

std::vector<ProblemRecord> load_problems(const std::filesystem::path& path);
std::vector<TraceRecord> load_traces(const std::filesystem::path& path);

/// Joins trace records with problems (by id) and fills in missing fields.
/// Problems may be empty when every record already carries both a count and
/// a correctness flag. Throws MissingCount / MalformedRecord / EmptyInput.
std::vector<metrics::EvalOutcome> resolve_outcomes(
    std::span<const ProblemRecord> problems, std::span<const TraceRecord> traces,
    metrics::TokenScheme scheme);

} // namespace conciserl::records
