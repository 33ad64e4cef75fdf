#include "conciserl/rewards.hpp"

#include <cmath>
#include <numbers>

#include "conciserl/errors.hpp"

namespace conciserl {

ConcisenessScore ConcisenessScore::from_raw(int s) {
    return ConcisenessScore{s, normalize_judge_score(s)};
}

double normalize_judge_score(int s) {
    if (s < 1 || s > 10) {
        throw OutOfRangeScore("judge score " + std::to_string(s) + " outside {1..10}");
    }
    return static_cast<double>(s) / 10.0;
}

RewardValue reward_pure(const ConcisenessScore& c) {
    return RewardValue{c.normalized, std::nullopt};
}

RewardValue reward_gated(int accuracy, const std::optional<ConcisenessScore>& c) {
    if (accuracy == 0) {
        return RewardValue{0.0, std::nullopt};
    }
    if (!c.has_value()) {
        throw MissingScore("gated reward needs a conciseness score for a correct trace");
    }
    return RewardValue{static_cast<double>(accuracy) * c->normalized, std::nullopt};
}

RewardValue reward_separated(int accuracy, const std::optional<ConcisenessScore>& c,
                             double accuracy_weight, double conciseness_weight) {
    if (!c.has_value()) {
        throw MissingScore("separated reward always needs a conciseness score");
    }
    const double acc_part = accuracy_weight * static_cast<double>(accuracy);
    const double con_part = conciseness_weight * c->normalized;
    RewardValue v;
    v.components = std::make_pair(acc_part, con_part);
    v.scalar = acc_part + con_part;
    return v;
}

double cosine_reward(bool correct, double length, const CosineRewardParams& p) {
    if (!(p.max_length > 0.0)) {
        throw InvalidParams("cosine reward needs a positive max length");
    }
    if (length > p.max_length) {
        return p.exceed_penalty;
    }
    const double r0 = correct ? p.correct_at_zero : p.wrong_at_zero;
    const double rL = correct ? p.correct_at_max : p.wrong_at_max;
    return rL + 0.5 * (r0 - rL) * (1.0 + std::cos(std::numbers::pi * length / p.max_length));
}

double alpha_penalty_reward(bool correct, double length,
                            std::span<const double> correct_group_lengths,
                            double alpha) {
    if (alpha < 0.0 || alpha >= 1.0) {
        throw InvalidAlpha("alpha must lie in [0,1)");
    }
    if (!correct) {
        return 0.0;
    }
    if (correct_group_lengths.empty()) {
        throw DegenerateGroup("alpha penalty needs at least one correct trace in the group");
    }
    double mean = 0.0;
    for (double l : correct_group_lengths) mean += l;
    mean /= static_cast<double>(correct_group_lengths.size());
    double var = 0.0;
    for (double l : correct_group_lengths) var += (l - mean) * (l - mean);
    var /= static_cast<double>(correct_group_lengths.size());
    const double sd = std::sqrt(var);
    const double z = sd > 0.0 ? (length - mean) / sd : 0.0;
    const double sigmoid = 1.0 / (1.0 + std::exp(-z));
    return 1.0 - alpha * sigmoid;
}

bool RewardVariant::needs_judge_when_correct() const {
    switch (tag) {
        case RewardVariantTag::Pure:
        case RewardVariantTag::Gated:
        case RewardVariantTag::Separated:
            return true;
        default:
            return false;
    }
}

bool RewardVariant::needs_judge_when_incorrect() const {
    // The gate exists precisely to skip judge calls on wrong traces.
    switch (tag) {
        case RewardVariantTag::Pure:
        case RewardVariantTag::Separated:
            return true;
        default:
            return false;
    }
}

RewardVariantTag parse_reward_variant(const std::string& name) {
    if (name == "pure") return RewardVariantTag::Pure;
    if (name == "gated") return RewardVariantTag::Gated;
    if (name == "separated") return RewardVariantTag::Separated;
    if (name == "cosine") return RewardVariantTag::CosineBaseline;
    if (name == "alpha") return RewardVariantTag::AlphaPenalty;
    if (name == "accuracy") return RewardVariantTag::AccuracyOnly;
    throw InvalidParams("unknown reward variant: " + name);
}

std::string reward_variant_name(RewardVariantTag tag) {
    switch (tag) {
        case RewardVariantTag::Pure: return "pure";
        case RewardVariantTag::Gated: return "gated";
        case RewardVariantTag::Separated: return "separated";
        case RewardVariantTag::CosineBaseline: return "cosine";
        case RewardVariantTag::AlphaPenalty: return "alpha";
        case RewardVariantTag::AccuracyOnly: return "accuracy";
    }
    return "unknown";
}

} // namespace conciserl
