#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace conciserl::metrics {

enum class TokenScheme { Approx, Provided };

TokenScheme parse_token_scheme(const std::string& name); // throws InvalidParams

/// Whitespace-delimited runs, each further split at alphanumeric /
/// non-alphanumeric boundaries: "a+b = c" counts as 5 tokens. This is a
/// stand-in scheme; it is not comparable to any real model tokenizer.
long count_tokens_approx(std::string_view text);

/// One evaluated problem.
struct EvalOutcome {
    std::string id;
    int correct = 0;            // {0,1}
    long token_count = 0;
    std::optional<int> level;   // difficulty 1..5 when known
};

struct LevelStats {
    double accuracy_pct = 0.0;
    double mean_length = 0.0;
    long count = 0;
};

struct AggregateMetrics {
    double accuracy_pct = 0.0;
    double mean_length = 0.0;
    double length_pct_of_reference = 0.0;
    std::map<int, LevelStats> per_level; // populated when every outcome has a level
    long count = 0;
};

/// Accuracy, mean token length, and length as a percentage of the
/// reference run's mean length. Throws EmptyInput / ZeroReference.
AggregateMetrics aggregate(std::span<const EvalOutcome> outcomes,
                           std::span<const EvalOutcome> reference);

/// Unweighted arithmetic mean across per-dataset values (the tables'
/// "Average" column). Throws EmptyInput.
double average_row(std::span<const double> per_dataset_values);

/// Per-level accuracy and mean length. Every outcome must carry a level.
std::map<int, LevelStats> difficulty_breakdown(std::span<const EvalOutcome> outcomes);

/// Gaussian smoothing with an odd window of `width` points, sigma =
/// width/4, weights normalized to sum 1, reflect padding at the edges.
/// Output length equals input length.
std::vector<double> smooth_series(std::span<const double> values, int width = 9);

/// Display rounding: half away from zero at `decimals` places. Applied
/// only at emission; internal values stay full precision.
double round_display(double value, int decimals = 1);
std::string format_display(double value, int decimals = 1);

} // namespace conciserl::metrics
