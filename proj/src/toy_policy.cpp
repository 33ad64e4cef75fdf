#include "conciserl/toy_policy.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <json.hpp>

#include "conciserl/errors.hpp"
#include "conciserl/io.hpp"

namespace conciserl::toy {

namespace {

constexpr int kCtxSize = kVocabSize + 1; // token ids plus PAD

/// Canonical 53-bit uniform in [0,1); avoids distribution objects so the
/// stream is pinned by the engine alone.
double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct Row {
    double logp[kVocabSize];
    double prob[kVocabSize];
};

Row softmax_row(const PolicyParams& params, std::size_t offset) {
    Row row;
    const double* l = params.logits.data() + offset;
    double m = l[0];
    for (int v = 1; v < kVocabSize; ++v) m = std::max(m, l[v]);
    double sum = 0.0;
    for (int v = 0; v < kVocabSize; ++v) sum += std::exp(l[v] - m);
    const double lse = m + std::log(sum);
    for (int v = 0; v < kVocabSize; ++v) {
        row.logp[v] = l[v] - lse;
        row.prob[v] = std::exp(row.logp[v]);
    }
    return row;
}

struct ContextWalker {
    int c2 = kPadContext;
    int c1 = kPadContext;

    void push(int token) {
        c2 = c1;
        c1 = token;
    }
};

} // namespace

int answer_token(int value) {
    return kAnswerBase + value;
}

std::optional<int> answer_value(int token) {
    if (token >= kAnswerBase && token < kAnswerBase + kNumAnswers) {
        return token - kAnswerBase;
    }
    return std::nullopt;
}

std::string token_name(int token) {
    if (token == kStepToken) return "STEP";
    if (token == kFillerToken) return "FILLER";
    if (token == kEndToken) return "END";
    if (auto v = answer_value(token)) {
        return "ANS(" + std::to_string(*v) + ")";
    }
    return "?" + std::to_string(token);
}

std::optional<std::vector<int>> parse_trace_text(std::string_view text) {
    std::vector<int> tokens;
    std::istringstream ss{std::string(text)};
    std::string word;
    while (ss >> word) {
        if (word == "STEP") {
            tokens.push_back(kStepToken);
        } else if (word == "FILLER") {
            tokens.push_back(kFillerToken);
        } else if (word == "END") {
            tokens.push_back(kEndToken);
        } else if (word.size() > 5 && word.starts_with("ANS(") && word.back() == ')') {
            int v = -1;
            try {
                v = std::stoi(word.substr(4, word.size() - 5));
            } catch (...) {
                return std::nullopt;
            }
            if (v < 0 || v >= kNumAnswers) return std::nullopt;
            tokens.push_back(answer_token(v));
        } else {
            return std::nullopt;
        }
    }
    if (tokens.empty()) return std::nullopt;
    return tokens;
}

SyntheticProblem make_problem(int a, int b) {
    SyntheticProblem p;
    p.a = a;
    p.b = b;
    p.gold = a + b;
    p.prompt_id = p.gold; // problems with equal answers form one prompt class
    return p;
}

std::vector<SyntheticProblem> all_problems() {
    std::vector<SyntheticProblem> ps;
    ps.reserve(100);
    for (int a = 0; a <= 9; ++a) {
        for (int b = 0; b <= 9; ++b) {
            ps.push_back(make_problem(a, b));
        }
    }
    return ps;
}

PolicyParams PolicyParams::zeros(int num_buckets) {
    PolicyParams p;
    p.num_buckets = num_buckets;
    p.logits.assign(static_cast<std::size_t>(num_buckets) * kCtxSize * kCtxSize * kVocabSize, 0.0);
    return p;
}

PolicyParams PolicyParams::init_verbose(std::uint64_t seed, double noise_scale,
                                        double filler_bias, int num_buckets) {
    PolicyParams p = zeros(num_buckets);
    std::mt19937_64 rng(seed);
    for (double& l : p.logits) {
        l = (2.0 * uniform01(rng) - 1.0) * noise_scale;
    }
    for (std::size_t row = 0; row < p.logits.size(); row += kVocabSize) {
        p.logits[row + kFillerToken] += filler_bias;
    }
    return p;
}

std::size_t PolicyParams::table_size() const {
    return logits.size();
}

std::size_t PolicyParams::row_offset(int bucket, int ctx2, int ctx1) const {
    return ((static_cast<std::size_t>(bucket) * kCtxSize + static_cast<std::size_t>(ctx2)) * kCtxSize +
            static_cast<std::size_t>(ctx1)) *
           kVocabSize;
}

int PolicyParams::bucket_of(const SyntheticProblem& problem) const {
    const int b = problem.prompt_id % num_buckets;
    return b >= 0 ? b : b + num_buckets;
}

bool PolicyParams::same_shape(const PolicyParams& other) const {
    return num_buckets == other.num_buckets && logits.size() == other.logits.size();
}

std::string Trace::text() const {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) out.push_back(' ');
        out += token_name(tokens[i]);
    }
    return out;
}

std::vector<Trace> sample(const SyntheticProblem& problem, const PolicyParams& params,
                          int n, int max_len, std::uint64_t seed) {
    if (n < 2) {
        throw DegenerateConfig("sample: need at least 2 rollouts for a leave-one-out peer");
    }
    if (max_len < 2) {
        throw DegenerateConfig("sample: max_len must be at least 2");
    }
    const int bucket = params.bucket_of(problem);
    std::mt19937_64 rng(seed);
    std::vector<Trace> traces;
    traces.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Trace t;
        ContextWalker ctx;
        for (int step = 0; step < max_len; ++step) {
            const Row row = softmax_row(params, params.row_offset(bucket, ctx.c2, ctx.c1));
            const double u = uniform01(rng);
            int chosen = kVocabSize - 1;
            double cum = 0.0;
            for (int v = 0; v < kVocabSize; ++v) {
                cum += row.prob[v];
                if (u < cum) {
                    chosen = v;
                    break;
                }
            }
            t.tokens.push_back(chosen);
            t.per_step_logprobs.push_back(row.logp[chosen]);
            t.logprob += row.logp[chosen];
            if (chosen == kEndToken) {
                break;
            }
            ctx.push(chosen);
        }
        traces.push_back(std::move(t));
    }
    return traces;
}

double logprob(const Trace& trace, const SyntheticProblem& problem,
               const PolicyParams& params) {
    const int bucket = params.bucket_of(problem);
    ContextWalker ctx;
    double lp = 0.0;
    for (int token : trace.tokens) {
        const Row row = softmax_row(params, params.row_offset(bucket, ctx.c2, ctx.c1));
        lp += row.logp[token];
        ctx.push(token);
    }
    return lp;
}

void accumulate_logprob_grad(const Trace& trace, const SyntheticProblem& problem,
                             const PolicyParams& params, double weight,
                             std::span<double> grad) {
    const int bucket = params.bucket_of(problem);
    ContextWalker ctx;
    for (int token : trace.tokens) {
        const std::size_t offset = params.row_offset(bucket, ctx.c2, ctx.c1);
        const Row row = softmax_row(params, offset);
        for (int v = 0; v < kVocabSize; ++v) {
            grad[offset + static_cast<std::size_t>(v)] -= weight * row.prob[v];
        }
        grad[offset + static_cast<std::size_t>(token)] += weight;
        ctx.push(token);
    }
}

std::vector<double> logprob_grad(const Trace& trace, const SyntheticProblem& problem,
                                 const PolicyParams& params) {
    std::vector<double> grad(params.table_size(), 0.0);
    accumulate_logprob_grad(trace, problem, params, 1.0, grad);
    return grad;
}

int oracle_accuracy(const Trace& trace, const SyntheticProblem& problem) {
    int last_answer = -1;
    for (int token : trace.tokens) {
        if (token == kEndToken) break;
        if (auto v = answer_value(token)) {
            last_answer = *v;
        }
    }
    return last_answer == problem.gold ? 1 : 0;
}

std::pair<int, int> oracle_essentials(const Trace& trace) {
    int essentials = 0;
    int total = 0;
    for (int token : trace.tokens) {
        if (token == kEndToken) break;
        ++total;
        if (answer_value(token).has_value()) {
            essentials = 1;
        }
    }
    return {essentials, total};
}

namespace {

void enumerate_rec(const PolicyParams& params, int bucket, int max_len,
                   std::vector<int>& prefix, double lp, ContextWalker ctx,
                   std::vector<EnumeratedTrace>& out) {
    const Row row = softmax_row(params, params.row_offset(bucket, ctx.c2, ctx.c1));
    for (int v = 0; v < kVocabSize; ++v) {
        prefix.push_back(v);
        const double lp2 = lp + row.logp[v];
        if (v == kEndToken || static_cast<int>(prefix.size()) == max_len) {
            out.push_back(EnumeratedTrace{prefix, lp2});
        } else {
            ContextWalker next = ctx;
            next.push(v);
            enumerate_rec(params, bucket, max_len, prefix, lp2, next, out);
        }
        prefix.pop_back();
    }
}

} // namespace

std::vector<EnumeratedTrace> enumerate_traces(const SyntheticProblem& problem,
                                              const PolicyParams& params, int max_len) {
    if (max_len < 1) {
        throw DegenerateConfig("enumerate_traces: max_len must be positive");
    }
    std::vector<EnumeratedTrace> out;
    std::vector<int> prefix;
    enumerate_rec(params, params.bucket_of(problem), max_len, prefix, 0.0, ContextWalker{}, out);
    return out;
}

void save_params(const PolicyParams& params, const std::filesystem::path& path) {
    nlohmann::json j;
    j["format"] = "conciserl-policy";
    j["version"] = 1;
    j["num_buckets"] = params.num_buckets;
    j["context_order"] = 2;
    j["vocab_size"] = kVocabSize;
    j["logits"] = params.logits;
    io::atomic_write_file(path, j.dump());
}

PolicyParams load_params(const std::filesystem::path& path) {
    nlohmann::json j = nlohmann::json::parse(io::read_file(path));
    if (j.value("format", "") != "conciserl-policy" || j.value("version", 0) != 1) {
        throw MalformedRecord("unrecognized policy snapshot header in " + path.string());
    }
    if (j.value("vocab_size", 0) != kVocabSize || j.value("context_order", 0) != 2) {
        throw MalformedRecord("policy snapshot shape mismatch in " + path.string());
    }
    PolicyParams p = PolicyParams::zeros(j.at("num_buckets").get<int>());
    auto logits = j.at("logits").get<std::vector<double>>();
    if (logits.size() != p.table_size()) {
        throw MalformedRecord("policy snapshot table size mismatch in " + path.string());
    }
    p.logits = std::move(logits);
    return p;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace conciserl::toy
