#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>

namespace conciserl {

/// Discrete judge score in {1..10} together with its normalized value s/10.
struct ConcisenessScore {
    int raw = 1;
    double normalized = 0.1;

    static ConcisenessScore from_raw(int s); // throws OutOfRangeScore
};

/// Maps a raw judge score to [0.1, 1.0]. Throws OutOfRangeScore outside {1..10}.
double normalize_judge_score(int s);

/// Scalar reward; the separated variant also carries its two channels
/// (accuracy part, conciseness part) so they can be logged independently.
struct RewardValue {
    double scalar = 0.0;
    std::optional<std::pair<double, double>> components;
};

/// Conciseness alone.
RewardValue reward_pure(const ConcisenessScore& c);

/// Conciseness gated by correctness: incorrect traces earn 0 and need no
/// judge score at all.
RewardValue reward_gated(int accuracy, const std::optional<ConcisenessScore>& c);

/// Accuracy and conciseness as distinct channels, combined as a weighted
/// sum (unit weights by default).
RewardValue reward_separated(int accuracy, const std::optional<ConcisenessScore>& c,
                             double accuracy_weight = 1.0,
                             double conciseness_weight = 1.0);

/// Cosine length schedule with separate endpoint pairs for correct and
/// wrong answers plus a flat penalty past the length cap.
struct CosineRewardParams {
    double max_length = 14336.0;
    double correct_at_zero = 2.0;
    double correct_at_max = 1.0;
    double wrong_at_zero = -10.0;
    double wrong_at_max = 0.0;
    double exceed_penalty = -10.0;
};

double cosine_reward(bool correct, double length, const CosineRewardParams& p);

/// Group-relative length penalty: correct traces earn 1 - alpha * sigmoid(z)
/// where z standardizes the trace length against the lengths of the correct
/// traces in its rollout group. Incorrect traces earn 0.
double alpha_penalty_reward(bool correct, double length,
                            std::span<const double> correct_group_lengths,
                            double alpha);

enum class RewardVariantTag {
    Pure,
    Gated,
    Separated,
    CosineBaseline,
    AlphaPenalty,
    AccuracyOnly,
};

/// A reward configuration: the variant tag plus whatever constants that
/// variant needs.
struct RewardVariant {
    RewardVariantTag tag = RewardVariantTag::Gated;
    CosineRewardParams cosine;
    double alpha = 0.4;
    double separated_accuracy_weight = 1.0;
    double separated_conciseness_weight = 1.0;

    bool needs_judge_when_correct() const;
    bool needs_judge_when_incorrect() const;
};

RewardVariantTag parse_reward_variant(const std::string& name); // throws InvalidParams
std::string reward_variant_name(RewardVariantTag tag);

} // namespace conciserl
