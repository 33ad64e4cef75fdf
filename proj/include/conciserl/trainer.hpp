#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "conciserl/rewards.hpp"
#include "conciserl/toy_policy.hpp"

namespace conciserl::judge {
class JudgeClient;
}

namespace conciserl::train {

/// n rollouts for one prompt with their rewards, leave-one-out advantages,
/// and the log-probabilities recorded under the pre-update policy.
struct RolloutGroup {
    toy::SyntheticProblem problem;
    std::vector<toy::Trace> traces;
    std::vector<double> rewards;
    std::vector<double> advantages;
    std::vector<double> old_logprobs;
};

/// A_i = R_i - mean of the other rewards. Sums to zero per group.
/// Throws DegenerateGroup when fewer than 2 rewards.
std::vector<double> loo_advantage(std::span<const double> rewards);

/// clip(ratio, 1-eps, 1+eps) * advantage. Throws InvalidRatio when ratio <= 0.
double ppo_weight(double ratio, double eps, double advantage);

struct SurrogateResult {
    double value = 0.0;
    std::vector<double> grad; // same layout as the policy logit table
};

/// Mean over the group of w_i * logprob(y_i) under `params`, with
/// w_i = clip(exp(lp - lp_old), 1-eps, 1+eps) * A_i held constant when
/// differentiating (stop-gradient). The optimizer ascends this value.
SurrogateResult surrogate_loss(const RolloutGroup& group, const toy::PolicyParams& params,
                               double clip_eps);

/// Monte-Carlo estimate of KL(p || q) = E_{y~p}[log p(y) - log q(y)] over
/// traces sampled from p across the given problems. Uses the per-sample
/// estimator (q/p - 1) - log(q/p), which is unbiased for the same
/// expectation but never negative, so logged KL values respect KL >= 0.
double kl_estimate(const toy::PolicyParams& p, const toy::PolicyParams& q,
                   std::span<const toy::SyntheticProblem> problems, int samples,
                   int max_len, std::uint64_t seed);

/// Exact KL over the enumerated trace tree; only feasible for small max_len.
double kl_exact(const toy::PolicyParams& p, const toy::PolicyParams& q,
                const toy::SyntheticProblem& problem, int max_len);

struct TrainConfig {
    // Plain ascent on a batch-mean surrogate needs a large step at toy scale;
    // paper() carries the published full-scale value.
    double learning_rate = 50.0;
    double kl_coefficient = 1e-3;
    double clip_epsilon = 0.2;
    int rollouts_per_prompt = 8;
    int prompts_per_batch = 32;
    int steps = 200;
    int max_len = 16;
    std::uint64_t seed = 0;
    RewardVariant variant;
    bool normalize_advantages = false; // divide by group std when enabled
    int checkpoint_every = 50;
    int kl_sample_count = 64;

    void validate() const; // throws InvalidParams

    /// Hyperparameters as reported for the full-size training runs.
    static TrainConfig paper();
};

struct StepLog {
    int step = 0;
    double reward_mean = 0.0;
    double accuracy_mean = 0.0;
    double length_mean = 0.0;
    double judge_score_mean = 0.0; // mean raw score over scored traces; NaN if none
    double kl_initial = 0.0;
    double kl_prev = 0.0;
};

std::string step_log_csv_header();
std::string step_log_csv_row(const StepLog& log);

/// Conciseness scoring seam used by the trainer: the deterministic mock or
/// a remote LLM judge behind the wire client.
class ConcisenessJudge {
public:
    virtual ~ConcisenessJudge() = default;
    virtual int score(const toy::Trace& trace, const toy::SyntheticProblem& problem) = 0;
};

class MockTraceJudge final : public ConcisenessJudge {
public:
    int score(const toy::Trace& trace, const toy::SyntheticProblem& problem) override;
};

class RemoteTraceJudge final : public ConcisenessJudge {
public:
    explicit RemoteTraceJudge(judge::JudgeClient& client) : client_(client) {}
    int score(const toy::Trace& trace, const toy::SyntheticProblem& problem) override;

private:
    judge::JudgeClient& client_;
};

std::string render_problem_text(const toy::SyntheticProblem& problem);

struct TrainState {
    toy::PolicyParams params;
    toy::PolicyParams initial_params;
    int step = 0;

    static TrainState fresh(std::uint64_t seed);
};

/// One rollout-reward-update cycle. Any judge failure aborts before the
/// parameters are touched, so a failed step leaves the state bit-identical.
StepLog train_step(TrainState& state, std::span<const toy::SyntheticProblem> batch,
                   const TrainConfig& cfg, ConcisenessJudge& judge);

using StepCallback = std::function<void(const StepLog&, const TrainState&)>;

/// Samples batches uniformly from `dataset` and runs cfg.steps steps.
std::vector<StepLog> run_training(TrainState& state,
                                  std::span<const toy::SyntheticProblem> dataset,
                                  const TrainConfig& cfg, ConcisenessJudge& judge,
                                  const StepCallback& on_step = nullptr);

} // namespace conciserl::train
