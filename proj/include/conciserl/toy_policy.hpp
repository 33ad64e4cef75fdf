#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace conciserl::toy {

// Token alphabet for the synthetic single-digit addition task. ANS(v)
// emits candidate answer v in 0..18; END is absorbing.
inline constexpr int kStepToken = 0;
inline constexpr int kFillerToken = 1;
inline constexpr int kAnswerBase = 2;
inline constexpr int kNumAnswers = 19;
inline constexpr int kEndToken = kAnswerBase + kNumAnswers; // 21
inline constexpr int kVocabSize = kEndToken + 1;            // 22
inline constexpr int kPadContext = kVocabSize;              // virtual "before start" token

int answer_token(int value);
std::optional<int> answer_value(int token);
std::string token_name(int token);
std::optional<std::vector<int>> parse_trace_text(std::string_view text);

/// a + b with single-digit operands. Problems that share a gold answer share
/// a prompt id, so the policy's prompt bucket is a learnable answer class.
struct SyntheticProblem {
    int a = 0;
    int b = 0;
    int gold = 0;
    int prompt_id = 0;
};

SyntheticProblem make_problem(int a, int b);

/// All 100 single-digit pairs, the default training distribution.
std::vector<SyntheticProblem> all_problems();

/// Tabular softmax policy conditioned on the previous two tokens (PAD
/// before the start) and the prompt bucket. Small enough to enumerate,
/// differentiate exactly, and cross-check by brute force.
struct PolicyParams {
    int num_buckets = kNumAnswers;
    std::vector<double> logits; // [bucket][ctx2][ctx1][token], dense

    static PolicyParams zeros(int num_buckets = kNumAnswers);

    /// Seeded init: uniform zero-mean noise of the given scale, with the
    /// FILLER logit raised so the starting policy is verbose.
    static PolicyParams init_verbose(std::uint64_t seed, double noise_scale = 0.1,
                                     double filler_bias = 1.0,
                                     int num_buckets = kNumAnswers);

    std::size_t table_size() const;
    std::size_t row_offset(int bucket, int ctx2, int ctx1) const;
    int bucket_of(const SyntheticProblem& problem) const;

    bool same_shape(const PolicyParams& other) const;
};

struct Trace {
    std::vector<int> tokens;              // includes END when sampled
    double logprob = 0.0;                 // sum of per_step_logprobs
    std::vector<double> per_step_logprobs;

    int length() const { return static_cast<int>(tokens.size()); }
    std::string text() const;
};

/// Samples n traces token-by-token; deterministic given the seed.
/// Throws DegenerateConfig when n < 2 or max_len < 2.
std::vector<Trace> sample(const SyntheticProblem& problem, const PolicyParams& params,
                          int n, int max_len, std::uint64_t seed);

/// Exact sequence log-probability of a trace under `params`.
double logprob(const Trace& trace, const SyntheticProblem& problem,
               const PolicyParams& params);

/// Adds weight * d(logprob)/d(logit) into `grad` (same layout as logits).
/// Per visited step: 1{v = chosen} - softmax(v | context) for every v.
void accumulate_logprob_grad(const Trace& trace, const SyntheticProblem& problem,
                             const PolicyParams& params, double weight,
                             std::span<double> grad);

std::vector<double> logprob_grad(const Trace& trace, const SyntheticProblem& problem,
                                 const PolicyParams& params);

/// 1 iff the last ANS token in the trace equals the gold answer.
int oracle_accuracy(const Trace& trace, const SyntheticProblem& problem);

/// (E, T): E = 1 iff an ANS emission is present, T = count of non-END
/// tokens. Feeds the mock judge; correctness is deliberately not consulted.
std::pair<int, int> oracle_essentials(const Trace& trace);

/// Every trace of the tree truncated at max_len (END-terminated or cut at
/// max_len), with exact log-probabilities. Mass sums to 1. Only feasible
/// for small max_len.
struct EnumeratedTrace {
    std::vector<int> tokens;
    double logprob = 0.0;
};

std::vector<EnumeratedTrace> enumerate_traces(const SyntheticProblem& problem,
                                              const PolicyParams& params, int max_len);

// Parameter snapshots: JSON with a version header, see save_params.
void save_params(const PolicyParams& params, const std::filesystem::path& path);
PolicyParams load_params(const std::filesystem::path& path);

/// splitmix64 step, used to derive independent seed streams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

} // namespace conciserl::toy
