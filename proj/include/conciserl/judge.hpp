#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

namespace conciserl::judge {

struct JudgeConfig {
    std::string endpoint_url;      // e.g. "https://api.openai.com/v1"
    std::string model_name;
    std::string system_prompt;     // empty selects default_system_prompt()
    double temperature = 0.0;
    int max_reply_tokens = 64;
    double timeout_seconds = 30.0;
    int max_retries = 2;
    double budget_cap = 10.0;      // currency units
    int parallelism_limit = 4;
    double price_per_prompt_token = 0.0;
    double price_per_reply_token = 0.0;
    std::string cache_path;        // empty keeps the cache in memory only
    std::string api_key_env = "CONCISERL_JUDGE_KEY";

    void validate() const; // throws InvalidParams
};

struct JudgeVerdict {
    std::string raw_reply;
    int score = 0;             // 1..10
    double normalized = 0.0;   // score / 10
    long prompt_tokens = 0;
    long reply_tokens = 0;
    double cost = 0.0;
    bool from_cache = false;
    double latency_ms = 0.0;
};

/// First integer token (maximal digit run) in [1,10]; out-of-range runs
/// like "0" or "11" are skipped rather than clamped. Throws UnparseableReply.
int parse_score(std::string_view reply);

/// Hex SHA-256 over (model_name, system_prompt, problem_text, trace_text)
/// with length framing, so any prompt change invalidates cached scores.
std::string cache_key(std::string_view model_name, std::string_view system_prompt,
                      std::string_view problem_text, std::string_view trace_text);

/// Deterministic offline stand-in: scores the essential-step ratio, so
/// redundancy (not raw length) is what costs points.
/// clamp(round(10 * essentials / total), 1, 10); an empty body scores 1.
int mock_judge_score(int essentials, int total);

const std::string& default_system_prompt();

/// Conciseness scores over an OpenAI-compatible chat-completions endpoint,
/// with a persistent JSONL verdict cache, retries, a hard budget cap, and
/// bounded request concurrency. The judge is never shown the gold answer.
class JudgeClient {
public:
    explicit JudgeClient(JudgeConfig cfg);
    ~JudgeClient();

    JudgeClient(const JudgeClient&) = delete;
    JudgeClient& operator=(const JudgeClient&) = delete;

    /// Cache hit or live call + cache fill. Throws BudgetExceeded before
    /// any network I/O once spend reaches the cap; TransportError after
    /// max_retries; UnparseableReply with the raw reply attached.
    JudgeVerdict score_trace(std::string_view trace_text, std::string_view problem_text);

    double total_cost() const;
    long live_calls() const;
    long cache_hits() const;
    const JudgeConfig& config() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace conciserl::judge
