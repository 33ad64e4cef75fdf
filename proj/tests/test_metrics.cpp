#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "conciserl/errors.hpp"
#include "conciserl/metrics.hpp"

using namespace conciserl;
using metrics::EvalOutcome;

namespace {

std::vector<EvalOutcome> outcomes_with_mean(long mean, int n, int correct_count,
                                            std::optional<int> level = std::nullopt) {
    // n records with integral lengths summing to mean * n
    std::vector<EvalOutcome> out;
    for (int i = 0; i < n; ++i) {
        EvalOutcome o;
        o.id = "p" + std::to_string(i);
        o.correct = i < correct_count ? 1 : 0;
        o.token_count = mean + ((i % 2 == 0) ? 1 : -1) * (i / 2 ? 1 : 0);
        o.level = level;
        out.push_back(o);
    }
    // fix the sum exactly
    long sum = 0;
    for (auto& o : out) sum += o.token_count;
    out.back().token_count += mean * n - sum;
    return out;
}

} // namespace

TEST_CASE("approx token counting") {
    CHECK(metrics::count_tokens_approx("") == 0);
    CHECK(metrics::count_tokens_approx("a+b = c") == 5);
    CHECK(metrics::count_tokens_approx("hello world") == 2);
    CHECK(metrics::count_tokens_approx("x2") == 1);     // alnum run stays together
    CHECK(metrics::count_tokens_approx("f(x)=1") == 5); // f | ( | x | )= | 1
    CHECK(metrics::count_tokens_approx("  \n\t ") == 0);
}

TEST_CASE("aggregate reproduces the published length percentages") {
    struct Row {
        long method_mean;
        long reference_mean;
        double cell;
    };
    // Raw mean token counts vs. the table's Len.(%) column.
    const Row rows[] = {
        {543, 1516, 35.8}, {3221, 10442, 30.8}, {5732, 14886, 38.5},
        {11429, 24880, 45.9}, {4034, 19251, 21.0},
    };
    for (const auto& row : rows) {
        auto method = outcomes_with_mean(row.method_mean, 10, 8);
        auto reference = outcomes_with_mean(row.reference_mean, 10, 8);
        const auto m = metrics::aggregate(method, reference);
        CHECK(m.mean_length == doctest::Approx(static_cast<double>(row.method_mean)));
        CHECK(std::abs(m.length_pct_of_reference - row.cell) < 0.05);
    }
}

TEST_CASE("aggregate basics and errors") {
    auto run = outcomes_with_mean(100, 5, 3);
    const auto self = metrics::aggregate(run, run);
    CHECK(self.length_pct_of_reference == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(self.accuracy_pct == doctest::Approx(60.0));
    CHECK(self.count == 5);

    CHECK_THROWS_AS(metrics::aggregate({}, run), EmptyInput);
    CHECK_THROWS_AS(metrics::aggregate(run, {}), EmptyInput);
    auto zero = outcomes_with_mean(0, 3, 0);
    CHECK_THROWS_AS(metrics::aggregate(run, zero), ZeroReference);
}

TEST_CASE("aggregate is permutation invariant") {
    auto run = outcomes_with_mean(250, 16, 9);
    auto reference = outcomes_with_mean(900, 12, 7);
    const auto before = metrics::aggregate(run, reference);
    std::mt19937_64 rng(3);
    std::shuffle(run.begin(), run.end(), rng);
    std::shuffle(reference.begin(), reference.end(), rng);
    const auto after = metrics::aggregate(run, reference);
    CHECK(before.accuracy_pct == after.accuracy_pct);
    CHECK(before.mean_length == after.mean_length);
    CHECK(before.length_pct_of_reference == after.length_pct_of_reference);
}

TEST_CASE("average_row matches the tables' Average column") {
    const std::vector<double> acc_row{80.9, 78.0, 24.5, 30.4, 32.5};
    CHECK(metrics::average_row(acc_row) == doctest::Approx(49.26).epsilon(1e-12));
    CHECK(metrics::format_display(metrics::average_row(acc_row), 1) == "49.3");

    const std::vector<double> difficulty_acc{95.35, 87.77, 87.62, 75.78, 57.46};
    CHECK(metrics::average_row(difficulty_acc) == doctest::Approx(80.796).epsilon(1e-12));
    CHECK(metrics::format_display(metrics::average_row(difficulty_acc), 2) == "80.80");

    const std::vector<double> difficulty_acc_sep{95.35, 77.78, 80.95, 64.84, 47.78};
    CHECK(metrics::average_row(difficulty_acc_sep) == doctest::Approx(73.34).epsilon(1e-12));

    const std::vector<double> difficulty_len{118.40, 159.95, 476.69, 1470.79, 4431.25};
    CHECK(metrics::format_display(metrics::average_row(difficulty_len), 2) == "1331.42");

    CHECK(metrics::average_row(std::vector<double>{42.0}) == 42.0);
    CHECK_THROWS_AS(metrics::average_row({}), EmptyInput);
}

TEST_CASE("difficulty breakdown") {
    SUBCASE("singleton level") {
        std::vector<EvalOutcome> one{{"a", 1, 100, 3}};
        const auto table = metrics::difficulty_breakdown(one);
        REQUIRE(table.size() == 1);
        CHECK(table.at(3).accuracy_pct == 100.0);
        CHECK(table.at(3).mean_length == 100.0);
    }
    SUBCASE("empty buckets are absent") {
        std::vector<EvalOutcome> two{{"a", 1, 10, 1}, {"b", 0, 30, 5}};
        const auto table = metrics::difficulty_breakdown(two);
        CHECK(table.size() == 2);
        CHECK(table.count(2) == 0);
        CHECK(table.count(3) == 0);
    }
    SUBCASE("missing level throws") {
        std::vector<EvalOutcome> bad{{"a", 1, 10, 1}, {"b", 0, 30, std::nullopt}};
        CHECK_THROWS_AS(metrics::difficulty_breakdown(bad), MissingLevel);
    }
    SUBCASE("record-weighted combination equals overall accuracy") {
        std::mt19937_64 rng(7);
        std::vector<EvalOutcome> outcomes;
        long correct = 0;
        for (int i = 0; i < 200; ++i) {
            EvalOutcome o;
            o.id = "r" + std::to_string(i);
            o.correct = static_cast<int>(rng() % 2);
            o.token_count = static_cast<long>(rng() % 1000);
            o.level = static_cast<int>(1 + rng() % 5);
            correct += o.correct;
            outcomes.push_back(o);
        }
        const auto table = metrics::difficulty_breakdown(outcomes);
        double weighted = 0.0;
        for (const auto& [level, stats] : table) {
            CHECK(stats.accuracy_pct >= 0.0);
            CHECK(stats.accuracy_pct <= 100.0);
            weighted += stats.accuracy_pct * static_cast<double>(stats.count);
        }
        weighted /= 200.0;
        CHECK(weighted ==
              doctest::Approx(100.0 * static_cast<double>(correct) / 200.0).epsilon(1e-12));
    }
}

TEST_CASE("gaussian smoothing") {
    SUBCASE("constant series is unchanged") {
        std::vector<double> series(40, 3.25);
        const auto out = metrics::smooth_series(series, 9);
        REQUIRE(out.size() == series.size());
        for (double v : out) {
            CHECK(v == doctest::Approx(3.25).epsilon(1e-12));
        }
    }
    SUBCASE("unit impulse at the center returns the kernel") {
        std::vector<double> series(9, 0.0);
        series[4] = 1.0;
        const auto out = metrics::smooth_series(series, 9);

        // Independent kernel: sigma = width/4, normalized.
        const double sigma = 9.0 / 4.0;
        std::vector<double> kernel(9);
        double norm = 0.0;
        for (int k = -4; k <= 4; ++k) {
            kernel[k + 4] = std::exp(-0.5 * (k / sigma) * (k / sigma));
            norm += kernel[k + 4];
        }
        for (auto& w : kernel) w /= norm;
        for (int i = 0; i < 9; ++i) {
            CHECK(out[i] == doctest::Approx(kernel[i]).epsilon(1e-12));
        }
    }
    SUBCASE("linear ramp is preserved away from the edges") {
        std::vector<double> series(60);
        for (int i = 0; i < 60; ++i) series[i] = 2.0 * i - 7.0;
        const auto out = metrics::smooth_series(series, 9);
        for (int i = 4; i < 56; ++i) {
            CHECK(std::abs(out[i] - series[i]) < 1e-9);
        }
    }
    SUBCASE("mean preserved for interior-dominated series") {
        std::mt19937_64 rng(19);
        std::vector<double> series(50);
        for (auto& v : series) v = static_cast<double>(rng() % 1000) / 10.0;
        const auto out = metrics::smooth_series(series, 9);
        double before = 0.0, after = 0.0;
        for (std::size_t i = 0; i < series.size(); ++i) {
            before += series[i];
            after += out[i];
        }
        CHECK(std::abs(before / 50.0 - after / 50.0) < 1e-9);
    }
    SUBCASE("even width rejected") {
        std::vector<double> series(10, 1.0);
        CHECK_THROWS_AS(metrics::smooth_series(series, 8), EvenWidth);
        CHECK_THROWS_AS(metrics::smooth_series(series, 0), EvenWidth);
    }
}

TEST_CASE("display rounding is half away from zero") {
    CHECK(metrics::format_display(49.26, 1) == "49.3");
    CHECK(metrics::format_display(35.75, 1) == "35.8");
    CHECK(metrics::format_display(-0.25, 1) == "-0.3");
    CHECK(metrics::format_display(0.25, 1) == "0.3");
    CHECK(metrics::format_display(100.0, 1) == "100.0");
    CHECK(metrics::round_display(49.26, 1) == doctest::Approx(49.3));
}
