#include "conciserl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "conciserl/errors.hpp"
#include "conciserl/judge.hpp"

namespace conciserl::train {

std::vector<double> loo_advantage(std::span<const double> rewards) {
    const std::size_t n = rewards.size();
    if (n < 2) {
        throw DegenerateGroup("leave-one-out advantage needs at least 2 rollouts");
    }
    double sum = 0.0;
    for (double r : rewards) sum += r;
    std::vector<double> adv(n);
    for (std::size_t i = 0; i < n; ++i) {
        adv[i] = rewards[i] - (sum - rewards[i]) / static_cast<double>(n - 1);
    }
    return adv;
}

double ppo_weight(double ratio, double eps, double advantage) {
    if (!(ratio > 0.0)) {
        throw InvalidRatio("probability ratio must be positive");
    }
    return std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage;
}

SurrogateResult surrogate_loss(const RolloutGroup& group, const toy::PolicyParams& params,
                               double clip_eps) {
    const std::size_t n = group.traces.size();
    SurrogateResult result;
    result.grad.assign(params.table_size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double lp = logprob(group.traces[i], group.problem, params);
        const double ratio = std::exp(lp - group.old_logprobs[i]);
        const double w = ppo_weight(ratio, clip_eps, group.advantages[i]);
        result.value += inv_n * w * lp;
        accumulate_logprob_grad(group.traces[i], group.problem, params, inv_n * w,
                                result.grad);
    }
    return result;
}

double kl_estimate(const toy::PolicyParams& p, const toy::PolicyParams& q,
                   std::span<const toy::SyntheticProblem> problems, int samples,
                   int max_len, std::uint64_t seed) {
    if (problems.empty() || samples <= 0) {
        throw InvalidParams("kl_estimate needs problems and a positive sample count");
    }
    double acc = 0.0;
    int drawn = 0;
    std::size_t pi = 0;
    while (drawn < samples) {
        const auto& problem = problems[pi % problems.size()];
        ++pi;
        const int batch = std::min(samples - drawn, 8);
        auto traces = toy::sample(problem, p, std::max(batch, 2), max_len,
                                  toy::mix_seed(seed, pi));
        for (int i = 0; i < batch; ++i) {
            // per-sample (q/p - 1) - log(q/p): unbiased for KL(p||q) and
            // pointwise non-negative, so logged KL never dips below zero
            const double log_ratio =
                logprob(traces[static_cast<std::size_t>(i)], problem, q) -
                traces[static_cast<std::size_t>(i)].logprob;
            acc += std::expm1(log_ratio) - log_ratio;
            ++drawn;
        }
    }
    return acc / static_cast<double>(samples);
}

double kl_exact(const toy::PolicyParams& p, const toy::PolicyParams& q,
                const toy::SyntheticProblem& problem, int max_len) {
    auto leaves = toy::enumerate_traces(problem, p, max_len);
    double kl = 0.0;
    for (const auto& leaf : leaves) {
        toy::Trace t;
        t.tokens = leaf.tokens;
        const double lq = logprob(t, problem, q);
        kl += std::exp(leaf.logprob) * (leaf.logprob - lq);
    }
    return kl;
}

void TrainConfig::validate() const {
    if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) {
        throw InvalidParams("clip_epsilon must lie in (0,1)");
    }
    if (rollouts_per_prompt < 2) {
        throw InvalidParams("rollouts_per_prompt must be at least 2");
    }
    if (prompts_per_batch < 1) {
        throw InvalidParams("prompts_per_batch must be at least 1");
    }
    if (max_len < 2) {
        throw InvalidParams("max_len must be at least 2");
    }
    if (steps < 0) {
        throw InvalidParams("steps must be non-negative");
    }
}

TrainConfig TrainConfig::paper() {
    TrainConfig c;
    c.learning_rate = 5e-6;
    c.kl_coefficient = 1e-3;
    c.clip_epsilon = 0.2;
    c.rollouts_per_prompt = 8;
    c.prompts_per_batch = 32;
    return c;
}

std::string step_log_csv_header() {
    return "step,reward_mean,accuracy,length_mean,judge_score_mean,kl_initial,kl_prev";
}

std::string step_log_csv_row(const StepLog& log) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g", log.step,
                  log.reward_mean, log.accuracy_mean, log.length_mean,
                  log.judge_score_mean, log.kl_initial, log.kl_prev);
    return std::string(buf);
}

int MockTraceJudge::score(const toy::Trace& trace, const toy::SyntheticProblem&) {
    const auto [essentials, total] = toy::oracle_essentials(trace);
    return judge::mock_judge_score(essentials, total);
}

int RemoteTraceJudge::score(const toy::Trace& trace, const toy::SyntheticProblem& problem) {
    return client_.score_trace(trace.text(), render_problem_text(problem)).score;
}

std::string render_problem_text(const toy::SyntheticProblem& problem) {
    return "What is " + std::to_string(problem.a) + " + " + std::to_string(problem.b) + "?";
}

TrainState TrainState::fresh(std::uint64_t seed) {
    TrainState s;
    s.params = toy::PolicyParams::init_verbose(seed);
    s.initial_params = s.params;
    return s;
}

namespace {

double reward_for_trace(const RewardVariant& variant, int correct,
                        const std::optional<ConcisenessScore>& score, double length,
                        std::span<const double> correct_lengths) {
    switch (variant.tag) {
        case RewardVariantTag::Pure:
            return reward_pure(score.value()).scalar;
        case RewardVariantTag::Gated:
            return reward_gated(correct, score).scalar;
        case RewardVariantTag::Separated:
            return reward_separated(correct, score, variant.separated_accuracy_weight,
                                    variant.separated_conciseness_weight)
                .scalar;
        case RewardVariantTag::CosineBaseline:
            return cosine_reward(correct == 1, length, variant.cosine);
        case RewardVariantTag::AlphaPenalty:
            return alpha_penalty_reward(correct == 1, length, correct_lengths,
                                        variant.alpha);
        case RewardVariantTag::AccuracyOnly:
            return static_cast<double>(correct);
    }
    throw InvalidParams("unhandled reward variant");
}

} // namespace

StepLog train_step(TrainState& state, std::span<const toy::SyntheticProblem> batch,
                   const TrainConfig& cfg, ConcisenessJudge& judge) {
    cfg.validate();
    if (batch.empty()) {
        throw EmptyInput("train_step: empty batch");
    }

    const toy::PolicyParams old_params = state.params;
    const std::uint64_t step_seed = toy::mix_seed(cfg.seed, 0x5745 + static_cast<std::uint64_t>(state.step));

    // Rollouts, judged scores, rewards, and advantages are all computed
    // before any parameter mutation; a throwing judge aborts a step cleanly.
    std::vector<RolloutGroup> groups;
    groups.reserve(batch.size());
    StepLog log;
    log.step = state.step;
    double score_sum = 0.0;
    long score_count = 0;
    long trace_count = 0;

    for (std::size_t gi = 0; gi < batch.size(); ++gi) {
        RolloutGroup group;
        group.problem = batch[gi];
        group.traces = toy::sample(group.problem, old_params, cfg.rollouts_per_prompt,
                                   cfg.max_len, toy::mix_seed(step_seed, gi));

        std::vector<int> correct(group.traces.size());
        std::vector<double> correct_lengths;
        for (std::size_t i = 0; i < group.traces.size(); ++i) {
            correct[i] = toy::oracle_accuracy(group.traces[i], group.problem);
            if (correct[i] == 1) {
                correct_lengths.push_back(static_cast<double>(group.traces[i].length()));
            }
        }

        group.rewards.resize(group.traces.size());
        for (std::size_t i = 0; i < group.traces.size(); ++i) {
            std::optional<ConcisenessScore> score;
            const bool need_judge = correct[i] == 1
                                        ? cfg.variant.needs_judge_when_correct()
                                        : cfg.variant.needs_judge_when_incorrect();
            if (need_judge) {
                const int raw = judge.score(group.traces[i], group.problem);
                score = ConcisenessScore::from_raw(raw);
                score_sum += raw;
                ++score_count;
            }
            group.rewards[i] = reward_for_trace(cfg.variant, correct[i], score,
                                                group.traces[i].length(), correct_lengths);
            log.reward_mean += group.rewards[i];
            log.accuracy_mean += correct[i];
            log.length_mean += group.traces[i].length();
            ++trace_count;
        }

        group.advantages = loo_advantage(group.rewards);
        if (cfg.normalize_advantages) {
            double var = 0.0;
            for (double a : group.advantages) var += a * a;
            const double sd = std::sqrt(var / static_cast<double>(group.advantages.size()));
            if (sd > 0.0) {
                for (double& a : group.advantages) a /= sd;
            }
        }
        group.old_logprobs.reserve(group.traces.size());
        for (const auto& t : group.traces) {
            group.old_logprobs.push_back(t.logprob);
        }
        groups.push_back(std::move(group));
    }

    log.reward_mean /= static_cast<double>(trace_count);
    log.accuracy_mean /= static_cast<double>(trace_count);
    log.length_mean /= static_cast<double>(trace_count);
    log.judge_score_mean = score_count > 0
                               ? score_sum / static_cast<double>(score_count)
                               : std::numeric_limits<double>::quiet_NaN();

    // Ascent direction: mean over all traces of w_i * grad logprob, minus the
    // KL-to-initial penalty via the score-function estimator
    // grad KL(p||q) = E_{y~p}[(log p - log q) * grad log p].
    std::vector<double> grad(state.params.table_size(), 0.0);
    const double inv_total = 1.0 / static_cast<double>(trace_count);
    for (const auto& group : groups) {
        for (std::size_t i = 0; i < group.traces.size(); ++i) {
            const double lp = logprob(group.traces[i], group.problem, state.params);
            const double ratio = std::exp(lp - group.old_logprobs[i]);
            const double w = ppo_weight(ratio, cfg.clip_epsilon, group.advantages[i]);
            double coeff = w;
            if (cfg.kl_coefficient != 0.0) {
                const double lp_init =
                    logprob(group.traces[i], group.problem, state.initial_params);
                coeff -= cfg.kl_coefficient * (lp - lp_init);
            }
            accumulate_logprob_grad(group.traces[i], group.problem, state.params,
                                    inv_total * coeff, grad);
        }
    }

    for (std::size_t k = 0; k < grad.size(); ++k) {
        state.params.logits[k] += cfg.learning_rate * grad[k];
    }
    state.step += 1;

    std::vector<toy::SyntheticProblem> kl_problems(batch.begin(), batch.end());
    log.kl_prev = kl_estimate(state.params, old_params, kl_problems, cfg.kl_sample_count,
                              cfg.max_len, toy::mix_seed(step_seed, 0xeb01));
    log.kl_initial = kl_estimate(state.params, state.initial_params, kl_problems,
                                 cfg.kl_sample_count, cfg.max_len,
                                 toy::mix_seed(step_seed, 0xeb02));
    return log;
}

std::vector<StepLog> run_training(TrainState& state,
                                  std::span<const toy::SyntheticProblem> dataset,
                                  const TrainConfig& cfg, ConcisenessJudge& judge,
                                  const StepCallback& on_step) {
    cfg.validate();
    if (dataset.empty()) {
        throw EmptyInput("run_training: empty dataset");
    }
    std::vector<StepLog> logs;
    logs.reserve(static_cast<std::size_t>(cfg.steps));
    for (int s = 0; s < cfg.steps; ++s) {
        std::mt19937_64 rng(toy::mix_seed(cfg.seed, 0xba7c4 + static_cast<std::uint64_t>(state.step)));
        std::vector<toy::SyntheticProblem> batch;
        batch.reserve(static_cast<std::size_t>(cfg.prompts_per_batch));
        for (int i = 0; i < cfg.prompts_per_batch; ++i) {
            batch.push_back(dataset[static_cast<std::size_t>(rng() % dataset.size())]);
        }
        StepLog log = train_step(state, batch, cfg, judge);
        if (on_step) {
            on_step(log, state);
        }
        logs.push_back(log);
    }
    return logs;
}

} // namespace conciserl::train
