#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "conciserl/errors.hpp"
#include "conciserl/toy_policy.hpp"

using namespace conciserl;
using namespace conciserl::toy;

namespace {

PolicyParams random_params(std::uint64_t seed, double scale = 0.5) {
    PolicyParams p = PolicyParams::zeros();
    std::mt19937_64 rng(seed);
    for (double& l : p.logits) {
        l = scale * (2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53 - 1.0);
    }
    return p;
}

// Independent context walk used by the gradient and probability oracles.
std::vector<std::size_t> visited_row_offsets(const Trace& trace,
                                             const SyntheticProblem& problem,
                                             const PolicyParams& params) {
    std::vector<std::size_t> offsets;
    int c2 = kPadContext, c1 = kPadContext;
    for (int token : trace.tokens) {
        offsets.push_back(params.row_offset(params.bucket_of(problem), c2, c1));
        c2 = c1;
        c1 = token;
    }
    return offsets;
}

std::string leaf_key(const std::vector<int>& tokens) {
    std::string key;
    for (int t : tokens) {
        key += std::to_string(t);
        key.push_back('.');
    }
    return key;
}

} // namespace

TEST_CASE("vocabulary layout and rendering") {
    CHECK(kVocabSize == 22);
    CHECK(answer_token(0) == 2);
    CHECK(answer_token(18) == 20);
    CHECK(answer_value(kEndToken) == std::nullopt);
    CHECK(answer_value(answer_token(7)) == 7);
    CHECK(token_name(kStepToken) == "STEP");
    CHECK(token_name(answer_token(12)) == "ANS(12)");

    const auto tokens = parse_trace_text("FILLER STEP ANS(7) END");
    REQUIRE(tokens.has_value());
    Trace t;
    t.tokens = *tokens;
    CHECK(t.text() == "FILLER STEP ANS(7) END");
    CHECK(parse_trace_text("WAT") == std::nullopt);
    CHECK(parse_trace_text("ANS(19)") == std::nullopt);
    CHECK(parse_trace_text("") == std::nullopt);
}

TEST_CASE("sampling is deterministic and bounded") {
    const auto problem = make_problem(3, 4);
    const auto params = PolicyParams::init_verbose(5);
    const auto a = sample(problem, params, 8, 16, 1234);
    const auto b = sample(problem, params, 8, 16, 1234);
    REQUIRE(a.size() == 8);
    REQUIRE(b.size() == 8);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].tokens == b[i].tokens);
        CHECK(a[i].logprob == b[i].logprob);
        CHECK(a[i].per_step_logprobs == b[i].per_step_logprobs);
        CHECK(a[i].length() <= 16);
    }
    const auto c = sample(problem, params, 8, 16, 1235);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        any_diff = any_diff || a[i].tokens != c[i].tokens;
    }
    CHECK(any_diff);

    CHECK_THROWS_AS(sample(problem, params, 1, 16, 0), DegenerateConfig);
    CHECK_THROWS_AS(sample(problem, params, 4, 1, 0), DegenerateConfig);
}

TEST_CASE("uniform params: first token is END about 1/V of the time") {
    const auto problem = make_problem(2, 2);
    const auto params = PolicyParams::zeros();
    const int n = 100000;
    const auto traces = sample(problem, params, n, 2, 4);
    long end_first = 0;
    for (const auto& t : traces) {
        if (t.tokens[0] == kEndToken) ++end_first;
    }
    const double p = 1.0 / kVocabSize;
    const double sigma = std::sqrt(p * (1.0 - p) / n);
    CHECK(std::abs(static_cast<double>(end_first) / n - p) < 3.0 * sigma);
}

TEST_CASE("logprob: uniform single END token is ln(1/22)") {
    const auto problem = make_problem(0, 1);
    const auto params = PolicyParams::zeros();
    Trace t;
    t.tokens = {kEndToken};
    CHECK(logprob(t, problem, params) ==
          doctest::Approx(std::log(1.0 / 22.0)).epsilon(1e-12));
}

TEST_CASE("logprob matches the sample-time value") {
    const auto problem = make_problem(4, 5);
    const auto params = random_params(17);
    for (const auto& t : sample(problem, params, 8, 12, 7)) {
        CHECK(std::abs(logprob(t, problem, params) - t.logprob) < 1e-12);
        double sum = 0.0;
        for (double lp : t.per_step_logprobs) sum += lp;
        CHECK(std::abs(sum - t.logprob) < 1e-12);
    }
}

TEST_CASE("logprob is invariant to shifting a context's logits") {
    const auto problem = make_problem(1, 2);
    auto params = random_params(23);
    const auto traces = sample(problem, params, 4, 10, 3);
    const double before = logprob(traces[0], problem, params);
    const auto offsets = visited_row_offsets(traces[0], problem, params);
    REQUIRE(!offsets.empty());
    for (int v = 0; v < kVocabSize; ++v) {
        params.logits[offsets[0] + static_cast<std::size_t>(v)] += 2.5;
    }
    CHECK(logprob(traces[0], problem, params) == doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("softmax rows normalize: enumerated mass is 1") {
    const auto problem = make_problem(9, 9);
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const auto params = random_params(seed);
        for (int max_len : {1, 3}) {
            const auto leaves = enumerate_traces(problem, params, max_len);
            double mass = 0.0;
            for (const auto& leaf : leaves) mass += std::exp(leaf.logprob);
            CHECK(std::abs(mass - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("analytic gradient matches central finite differences") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 5; ++trial) {
        const auto problem = make_problem(static_cast<int>(rng() % 10),
                                          static_cast<int>(rng() % 10));
        auto params = random_params(rng());
        const auto traces = sample(problem, params, 2, 10, rng());
        const auto& trace = traces[0];
        const auto grad = logprob_grad(trace, problem, params);

        const auto offsets = visited_row_offsets(trace, problem, params);
        const double h = 1e-5;
        for (int check = 0; check < 10; ++check) {
            const std::size_t entry =
                offsets[rng() % offsets.size()] + rng() % kVocabSize;
            auto perturbed = params;
            perturbed.logits[entry] += h;
            const double up = logprob(trace, problem, perturbed);
            perturbed.logits[entry] -= 2.0 * h;
            const double down = logprob(trace, problem, perturbed);
            const double fd = (up - down) / (2.0 * h);
            const double denom = std::max({std::abs(fd), std::abs(grad[entry]), 1e-8});
            CHECK(std::abs(grad[entry] - fd) / denom < 1e-4);
        }
    }
}

TEST_CASE("gradient structure: unvisited rows zero, visited rows sum to zero") {
    const auto problem = make_problem(5, 3);
    const auto params = random_params(41);
    const auto traces = sample(problem, params, 2, 8, 11);
    const auto grad = logprob_grad(traces[0], problem, params);
    const auto offsets = visited_row_offsets(traces[0], problem, params);

    std::map<std::size_t, bool> visited;
    for (auto o : offsets) visited[o] = true;

    for (auto [offset, _] : visited) {
        double row_sum = 0.0;
        for (int v = 0; v < kVocabSize; ++v) {
            row_sum += grad[offset + static_cast<std::size_t>(v)];
        }
        CHECK(std::abs(row_sum) < 1e-12);
    }

    // Rows for a different prompt bucket are untouched.
    const auto other = make_problem(0, 0); // different gold => different bucket
    REQUIRE(params.bucket_of(other) != params.bucket_of(problem));
    const auto foreign = params.row_offset(params.bucket_of(other), kPadContext, kPadContext);
    for (int v = 0; v < kVocabSize; ++v) {
        CHECK(grad[foreign + static_cast<std::size_t>(v)] == 0.0);
    }
}

TEST_CASE("sampled frequencies match enumerated probabilities at max_len=3") {
    const auto problem = make_problem(6, 2);
    const auto params = random_params(53, 0.3);
    const auto leaves = enumerate_traces(problem, params, 3);

    std::map<std::string, double> expected;
    for (const auto& leaf : leaves) {
        expected[leaf_key(leaf.tokens)] = std::exp(leaf.logprob);
    }

    const int n = 100000;
    std::map<std::string, long> counts;
    for (const auto& t : sample(problem, params, n, 3, 613)) {
        counts[leaf_key(t.tokens)] += 1;
    }
    for (const auto& [key, count] : counts) {
        REQUIRE(expected.count(key) == 1); // every sampled trace is a tree leaf
    }
    double worst = 0.0;
    for (const auto& [key, prob] : expected) {
        const double freq =
            static_cast<double>(counts.count(key) ? counts.at(key) : 0) / n;
        worst = std::max(worst, std::abs(freq - prob));
    }
    CHECK(worst < 1e-2);
}

TEST_CASE("oracles: accuracy and essential steps") {
    const auto problem = make_problem(3, 4);

    Trace minimal;
    minimal.tokens = {answer_token(7), kEndToken};
    CHECK(oracle_accuracy(minimal, problem) == 1);
    CHECK(oracle_essentials(minimal) == std::pair{1, 1});

    Trace padded;
    padded.tokens = {kFillerToken, kFillerToken, kFillerToken, kFillerToken,
                     answer_token(7), kEndToken};
    CHECK(oracle_accuracy(padded, problem) == 1);
    CHECK(oracle_essentials(padded) == std::pair{1, 5});

    Trace wrong;
    wrong.tokens = {answer_token(6), kEndToken};
    CHECK(oracle_accuracy(wrong, problem) == 0);
    CHECK(oracle_essentials(wrong) == std::pair{1, 1});

    Trace restated;
    restated.tokens = {answer_token(6), kStepToken, answer_token(7), kEndToken};
    CHECK(oracle_accuracy(restated, problem) == 1); // the last answer counts

    Trace never_answers;
    never_answers.tokens = {kStepToken, kFillerToken, kEndToken};
    CHECK(oracle_accuracy(never_answers, problem) == 0);
    CHECK(oracle_essentials(never_answers) == std::pair{0, 2});

    Trace empty_body;
    empty_body.tokens = {kEndToken};
    CHECK(oracle_essentials(empty_body) == std::pair{0, 0});
}

TEST_CASE("parameter snapshots round-trip through disk") {
    const auto params = PolicyParams::init_verbose(99);
    const auto path = std::filesystem::temp_directory_path() /
                      ("conciserl_params_" + std::to_string(::getpid()) + ".json");
    save_params(params, path);
    const auto loaded = load_params(path);
    CHECK(loaded.num_buckets == params.num_buckets);
    CHECK(loaded.logits == params.logits);
    std::filesystem::remove(path);

    CHECK_THROWS_AS(load_params(path), IoError);
}

TEST_CASE("verbose initialization favors FILLER") {
    const auto params = PolicyParams::init_verbose(7);
    const auto problem = make_problem(2, 3);
    const auto traces = sample(problem, params, 64, 16, 5);
    long filler = 0, total = 0;
    for (const auto& t : traces) {
        for (int token : t.tokens) {
            if (token == kFillerToken) ++filler;
            ++total;
        }
    }
    // softmax(1.0 vs 0) over 22 tokens puts roughly 11% mass on FILLER,
    // far above the uniform 4.5%.
    CHECK(static_cast<double>(filler) / static_cast<double>(total) > 0.08);
}
