#include "conciserl/judge.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_map>

#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "conciserl/errors.hpp"
#include "conciserl/io.hpp"

namespace conciserl::judge {

using nlohmann::json;

void JudgeConfig::validate() const {
    if (parallelism_limit < 1) {
        throw InvalidParams("judge parallelism_limit must be >= 1");
    }
    if (budget_cap < 0.0) {
        throw InvalidParams("judge budget_cap must be >= 0");
    }
    if (temperature < 0.0) {
        throw InvalidParams("judge temperature must be >= 0");
    }
}

int parse_score(std::string_view reply) {
    std::size_t i = 0;
    while (i < reply.size()) {
        if (std::isdigit(static_cast<unsigned char>(reply[i]))) {
            std::size_t j = i;
            while (j < reply.size() && std::isdigit(static_cast<unsigned char>(reply[j]))) {
                ++j;
            }
            // Maximal digit run; runs longer than 2 digits can never be in range.
            if (j - i <= 2) {
                const int value = std::stoi(std::string(reply.substr(i, j - i)));
                if (value >= 1 && value <= 10) {
                    return value;
                }
            }
            i = j;
        } else {
            ++i;
        }
    }
    throw UnparseableReply("no integer in [1,10] found in judge reply", std::string(reply));
}

std::string cache_key(std::string_view model_name, std::string_view system_prompt,
                      std::string_view problem_text, std::string_view trace_text) {
    std::string material;
    auto frame = [&material](std::string_view part) {
        material += std::to_string(part.size());
        material.push_back(':');
        material.append(part);
        material.push_back('\n');
    };
    frame(model_name);
    frame(system_prompt);
    frame(problem_text);
    frame(trace_text);

    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(material.data(), material.size(), digest, &len, EVP_sha256(), nullptr);

    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

int mock_judge_score(int essentials, int total) {
    const double ratio = total > 0 ? 10.0 * static_cast<double>(essentials) /
                                         static_cast<double>(total)
                                   : 0.0;
    const long rounded = std::lround(ratio);
    return static_cast<int>(std::clamp(rounded, 1L, 10L));
}

const std::string& default_system_prompt() {
    static const std::string prompt =
        "You are a strict evaluator of reasoning conciseness.\n"
        "\n"
        "You will be shown a problem followed by a reasoning trace that attempts to\n"
        "solve it. Rate how concise the reasoning is on a scale from 1 to 10:\n"
        "\n"
        "  1  = overly verbose: filler phrases, restated steps, digressions,\n"
        "       meta-commentary, or redundant recomputation.\n"
        "  10 = clear and maximally concise: every step is logically necessary,\n"
        "       nothing is repeated, and no filler remains.\n"
        "\n"
        "Judge semantic compactness, not raw length. A short trace that rambles or\n"
        "repeats itself is not concise; a longer trace whose every step is needed\n"
        "can still score highly. Disregard whether the final answer is correct;\n"
        "correctness is evaluated elsewhere.\n"
        "\n"
        "Reply with a single integer from 1 to 10 and nothing else.\n";
    return prompt;
}

namespace {

struct CacheEntry {
    int score = 0;
    std::string raw;
    long prompt_tokens = 0;
    long reply_tokens = 0;
};

struct ParsedUrl {
    bool https = false;
    std::string base;        // scheme://host[:port]
    std::string path_prefix; // e.g. "/v1"
};

ParsedUrl parse_endpoint(const std::string& url) {
    ParsedUrl out;
    std::string_view v(url);
    if (v.starts_with("https://")) {
        out.https = true;
    } else if (!v.starts_with("http://")) {
        throw InvalidParams("judge endpoint_url must start with http:// or https://");
    }
    const std::size_t scheme_end = v.find("://") + 3;
    const std::size_t slash = v.find('/', scheme_end);
    if (slash == std::string_view::npos) {
        out.base = url;
    } else {
        out.base = std::string(v.substr(0, slash));
        std::string_view prefix = v.substr(slash);
        while (prefix.ends_with("/")) prefix.remove_suffix(1);
        out.path_prefix = std::string(prefix);
    }
    return out;
}

} // namespace

struct JudgeClient::Impl {
    JudgeConfig cfg;
    ParsedUrl endpoint;
    std::string api_key;

    std::mutex mutex;
    std::condition_variable slot_free;
    int in_flight = 0;
    std::unordered_map<std::string, CacheEntry> cache;
    std::ofstream cache_out;
    std::atomic<long> live = 0;
    std::atomic<long> hits = 0;
    double spent = 0.0; // guarded by mutex

    explicit Impl(JudgeConfig c) : cfg(std::move(c)) {
        cfg.validate();
        if (cfg.system_prompt.empty()) {
            cfg.system_prompt = default_system_prompt();
        }
        if (!cfg.endpoint_url.empty()) {
            endpoint = parse_endpoint(cfg.endpoint_url);
        }
        if (const char* key = std::getenv(cfg.api_key_env.c_str())) {
            api_key = key;
        }
        if (!cfg.cache_path.empty()) {
            load_cache();
            cache_out.open(cfg.cache_path, std::ios::app);
        }
    }

    void load_cache() {
        std::ifstream in(cfg.cache_path);
        if (!in) {
            return; // first run, file appears on the first live verdict
        }
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.contains("key") || !j.contains("score")) {
                continue; // tolerate a torn trailing line
            }
            CacheEntry e;
            e.score = j["score"].get<int>();
            e.raw = j.value("raw", "");
            e.prompt_tokens = j.value("prompt_tokens", 0L);
            e.reply_tokens = j.value("reply_tokens", 0L);
            cache[j["key"].get<std::string>()] = std::move(e);
        }
    }

    void append_cache_record(const std::string& key, const CacheEntry& e) {
        if (!cache_out.is_open()) return;
        json j;
        j["key"] = key;
        j["score"] = e.score;
        j["raw"] = e.raw;
        j["prompt_tokens"] = e.prompt_tokens;
        j["reply_tokens"] = e.reply_tokens;
        j["ts"] = io::rfc3339_now();
        cache_out << j.dump() << '\n';
        cache_out.flush();
    }

    std::string post_chat_completion(const std::string& body_json) {
        const std::string path = endpoint.path_prefix + "/chat/completions";
        httplib::Headers headers;
        if (!api_key.empty()) {
            headers.emplace("Authorization", "Bearer " + api_key);
        }
        std::string last_error;
        for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(std::chrono::milliseconds(50L * attempt));
            }
            // One client per request; httplib clients are not safe to share
            // across threads.
            httplib::Client client(endpoint.base);
            client.set_connection_timeout(std::chrono::duration<double>(cfg.timeout_seconds));
            client.set_read_timeout(std::chrono::duration<double>(cfg.timeout_seconds));
            auto res = client.Post(path, headers, body_json, "application/json");
            if (!res) {
                last_error = httplib::to_string(res.error());
                continue;
            }
            if (res->status != 200) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            return res->body;
        }
        throw TransportError("judge call to " + endpoint.base + path + " failed after " +
                             std::to_string(cfg.max_retries + 1) + " attempts: " + last_error);
    }
};

JudgeClient::JudgeClient(JudgeConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}

JudgeClient::~JudgeClient() = default;

JudgeVerdict JudgeClient::score_trace(std::string_view trace_text,
                                      std::string_view problem_text) {
    const auto start = std::chrono::steady_clock::now();
    auto elapsed_ms = [&start] {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                         start)
            .count();
    };
    const JudgeConfig& cfg = impl_->cfg;
    const std::string key =
        cache_key(cfg.model_name, cfg.system_prompt, problem_text, trace_text);

    {
        std::unique_lock lock(impl_->mutex);
        if (auto it = impl_->cache.find(key); it != impl_->cache.end()) {
            impl_->hits.fetch_add(1);
            JudgeVerdict v;
            v.raw_reply = it->second.raw;
            v.score = it->second.score;
            v.normalized = static_cast<double>(v.score) / 10.0;
            v.prompt_tokens = it->second.prompt_tokens;
            v.reply_tokens = it->second.reply_tokens;
            v.cost = 0.0;
            v.from_cache = true;
            v.latency_ms = elapsed_ms();
            return v;
        }
        if (impl_->spent >= cfg.budget_cap) {
            throw BudgetExceeded("judge budget cap reached (spent " +
                                 std::to_string(impl_->spent) + " of " +
                                 std::to_string(cfg.budget_cap) + ")");
        }
        impl_->slot_free.wait(lock, [this, &cfg] {
            return impl_->in_flight < cfg.parallelism_limit;
        });
        ++impl_->in_flight;
    }

    struct SlotGuard {
        Impl* impl;
        ~SlotGuard() {
            std::lock_guard lock(impl->mutex);
            --impl->in_flight;
            impl->slot_free.notify_one();
        }
    } slot{impl_.get()};

    json body;
    body["model"] = cfg.model_name;
    body["temperature"] = cfg.temperature;
    body["max_tokens"] = cfg.max_reply_tokens;
    body["messages"] = json::array({
        json{{"role", "system"}, {"content", cfg.system_prompt}},
        json{{"role", "user"},
             {"content", std::string(problem_text) + "\n\n" + std::string(trace_text)}},
    });

    const std::string reply_body = impl_->post_chat_completion(body.dump());
    impl_->live.fetch_add(1);

    json reply = json::parse(reply_body, nullptr, false);
    if (reply.is_discarded()) {
        throw UnparseableReply("judge endpoint returned invalid JSON", reply_body);
    }
    std::string content;
    try {
        content = reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        throw UnparseableReply("judge reply is missing choices[0].message.content",
                               reply_body);
    }

    JudgeVerdict v;
    v.raw_reply = content;
    v.score = parse_score(content); // throws with raw reply attached
    v.normalized = static_cast<double>(v.score) / 10.0;
    if (reply.contains("usage")) {
        v.prompt_tokens = reply["usage"].value("prompt_tokens", 0L);
        v.reply_tokens = reply["usage"].value("completion_tokens", 0L);
    }
    v.cost = static_cast<double>(v.prompt_tokens) * cfg.price_per_prompt_token +
             static_cast<double>(v.reply_tokens) * cfg.price_per_reply_token;
    v.from_cache = false;

    {
        std::lock_guard lock(impl_->mutex);
        impl_->spent += v.cost;
        CacheEntry e{v.score, v.raw_reply, v.prompt_tokens, v.reply_tokens};
        // Last writer wins; identical content makes the race benign.
        impl_->cache[key] = e;
        impl_->append_cache_record(key, e);
    }
    v.latency_ms = elapsed_ms();
    return v;
}

double JudgeClient::total_cost() const {
    std::lock_guard lock(impl_->mutex);
    return impl_->spent;
}

long JudgeClient::live_calls() const {
    return impl_->live.load();
}

long JudgeClient::cache_hits() const {
    return impl_->hits.load();
}

const JudgeConfig& JudgeClient::config() const {
    return impl_->cfg;
}

} // namespace conciserl::judge
