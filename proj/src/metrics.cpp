#include "conciserl/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "conciserl/errors.hpp"

namespace conciserl::metrics {

namespace {

bool is_ws(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_alnum(char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

double mean_length(std::span<const EvalOutcome> outcomes) {
    double sum = 0.0;
    for (const auto& o : outcomes) sum += static_cast<double>(o.token_count);
    return sum / static_cast<double>(outcomes.size());
}

} // namespace

TokenScheme parse_token_scheme(const std::string& name) {
    if (name == "approx") return TokenScheme::Approx;
    if (name == "provided") return TokenScheme::Provided;
    throw InvalidParams("unknown token scheme: " + name);
}

long count_tokens_approx(std::string_view text) {
    long count = 0;
    bool in_run = false;
    bool prev_alnum = false;
    for (char c : text) {
        if (is_ws(c)) {
            in_run = false;
            continue;
        }
        const bool alnum = is_alnum(c);
        if (!in_run || alnum != prev_alnum) {
            ++count;
        }
        in_run = true;
        prev_alnum = alnum;
    }
    return count;
}

AggregateMetrics aggregate(std::span<const EvalOutcome> outcomes,
                           std::span<const EvalOutcome> reference) {
    if (outcomes.empty()) {
        throw EmptyInput("aggregate: no outcomes");
    }
    if (reference.empty()) {
        throw EmptyInput("aggregate: no reference outcomes");
    }
    const double ref_mean = mean_length(reference);
    if (!(ref_mean > 0.0)) {
        throw ZeroReference("aggregate: reference mean length must be positive");
    }

    AggregateMetrics m;
    m.count = static_cast<long>(outcomes.size());
    long correct = 0;
    bool all_levels = true;
    for (const auto& o : outcomes) {
        correct += o.correct;
        all_levels = all_levels && o.level.has_value();
    }
    m.accuracy_pct = 100.0 * static_cast<double>(correct) / static_cast<double>(outcomes.size());
    m.mean_length = mean_length(outcomes);
    m.length_pct_of_reference = 100.0 * m.mean_length / ref_mean;
    if (all_levels) {
        m.per_level = difficulty_breakdown(outcomes);
    }
    return m;
}

double average_row(std::span<const double> per_dataset_values) {
    if (per_dataset_values.empty()) {
        throw EmptyInput("average_row: no values");
    }
    double sum = 0.0;
    for (double v : per_dataset_values) sum += v;
    return sum / static_cast<double>(per_dataset_values.size());
}

std::map<int, LevelStats> difficulty_breakdown(std::span<const EvalOutcome> outcomes) {
    if (outcomes.empty()) {
        throw EmptyInput("difficulty_breakdown: no outcomes");
    }
    struct Acc { long correct = 0; double length = 0.0; long count = 0; };
    std::map<int, Acc> buckets;
    for (const auto& o : outcomes) {
        if (!o.level.has_value()) {
            throw MissingLevel("difficulty_breakdown: outcome " + o.id + " has no level");
        }
        auto& b = buckets[*o.level];
        b.correct += o.correct;
        b.length += static_cast<double>(o.token_count);
        ++b.count;
    }
    std::map<int, LevelStats> out;
    for (const auto& [level, b] : buckets) {
        out[level] = LevelStats{
            100.0 * static_cast<double>(b.correct) / static_cast<double>(b.count),
            b.length / static_cast<double>(b.count),
            b.count,
        };
    }
    return out;
}

std::vector<double> smooth_series(std::span<const double> values, int width) {
    if (width <= 0 || width % 2 == 0) {
        throw EvenWidth("smoothing width must be odd and positive");
    }
    const long n = static_cast<long>(values.size());
    if (n == 0) {
        return {};
    }
    const int radius = width / 2;
    const double sigma = static_cast<double>(width) / 4.0;

    std::vector<double> kernel(static_cast<std::size_t>(width));
    double norm = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        const double w = std::exp(-0.5 * (k / sigma) * (k / sigma));
        kernel[static_cast<std::size_t>(k + radius)] = w;
        norm += w;
    }
    for (double& w : kernel) w /= norm;

    // Reflect padding duplicates the edge sample (-1 -> 0, n -> n-1); with
    // a symmetric normalized kernel this keeps the series sum exact.
    auto reflect = [n](long j) {
        while (j < 0 || j >= n) {
            if (j < 0) j = -j - 1;
            if (j >= n) j = 2 * n - 1 - j;
        }
        return j;
    };

    std::vector<double> out(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
            acc += kernel[static_cast<std::size_t>(k + radius)] *
                   values[static_cast<std::size_t>(reflect(i + k))];
        }
        out[static_cast<std::size_t>(i)] = acc;
    }
    return out;
}

double round_display(double value, int decimals) {
    double scale = 1.0;
    for (int i = 0; i < decimals; ++i) scale *= 10.0;
    return std::round(value * scale) / scale; // std::round is half away from zero
}

std::string format_display(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, round_display(value, decimals));
    return std::string(buf);
}

} // namespace conciserl::metrics
