// conciserl: train the synthetic policy, score trace files with a judge,
// evaluate recorded runs, and emit table/curve data.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "conciserl/errors.hpp"
#include "conciserl/io.hpp"
#include "conciserl/judge.hpp"
#include "conciserl/metrics.hpp"
#include "conciserl/records.hpp"
#include "conciserl/rewards.hpp"
#include "conciserl/toy_policy.hpp"
#include "conciserl/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace conciserl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitBudget = 3;

/// Usage/config problems found before any work starts; exit code 1.
class ConfigError : public Error {
public:
    using Error::Error;
};

struct RunConfig {
    std::string mode;
    std::string dataset;
    std::string traces;
    std::string reference;
    std::string out;
    std::string cache;
    std::string token_scheme = "approx";
    std::string reward = "gated";
    double alpha = 0.4;
    std::string judge_kind = "mock"; // mock | remote
    std::string dataset_name;
    std::string method_name;
    std::string system_prompt_file;
    bool paper_config = false;
    std::vector<std::string> runs; // report inputs
    std::uint64_t seed = 0;

    train::TrainConfig train;
    judge::JudgeConfig judge;
};

void apply_config_file(RunConfig& cfg, const fs::path& path) {
    json j;
    try {
        j = json::parse(io::read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path.string() + ": " + e.what());
    }
    cfg.mode = j.value("mode", cfg.mode);
    cfg.dataset = j.value("dataset", cfg.dataset);
    cfg.traces = j.value("traces", cfg.traces);
    cfg.reference = j.value("reference", cfg.reference);
    cfg.out = j.value("out", cfg.out);
    cfg.cache = j.value("cache", cfg.cache);
    cfg.token_scheme = j.value("token_scheme", cfg.token_scheme);
    cfg.reward = j.value("reward", cfg.reward);
    cfg.alpha = j.value("alpha", cfg.alpha);
    cfg.judge_kind = j.value("judge", cfg.judge_kind);
    cfg.dataset_name = j.value("dataset_name", cfg.dataset_name);
    cfg.method_name = j.value("method_name", cfg.method_name);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.paper_config = j.value("paper_config", cfg.paper_config);
    if (j.contains("runs")) {
        cfg.runs = j["runs"].get<std::vector<std::string>>();
    }
    if (j.contains("train")) {
        const json& t = j["train"];
        cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
        cfg.train.kl_coefficient = t.value("kl_coefficient", cfg.train.kl_coefficient);
        cfg.train.clip_epsilon = t.value("clip_epsilon", cfg.train.clip_epsilon);
        cfg.train.rollouts_per_prompt =
            t.value("rollouts_per_prompt", cfg.train.rollouts_per_prompt);
        cfg.train.prompts_per_batch =
            t.value("prompts_per_batch", cfg.train.prompts_per_batch);
        cfg.train.steps = t.value("steps", cfg.train.steps);
        cfg.train.max_len = t.value("max_len", cfg.train.max_len);
        cfg.train.normalize_advantages =
            t.value("normalize_advantages", cfg.train.normalize_advantages);
        cfg.train.checkpoint_every = t.value("checkpoint_every", cfg.train.checkpoint_every);
        cfg.train.kl_sample_count = t.value("kl_sample_count", cfg.train.kl_sample_count);
        if (t.contains("cosine")) {
            const json& c = t["cosine"];
            auto& p = cfg.train.variant.cosine;
            p.max_length = c.value("max_length", p.max_length);
            p.correct_at_zero = c.value("correct_at_zero", p.correct_at_zero);
            p.correct_at_max = c.value("correct_at_max", p.correct_at_max);
            p.wrong_at_zero = c.value("wrong_at_zero", p.wrong_at_zero);
            p.wrong_at_max = c.value("wrong_at_max", p.wrong_at_max);
            p.exceed_penalty = c.value("exceed_penalty", p.exceed_penalty);
        }
        cfg.train.variant.separated_accuracy_weight = t.value(
            "separated_accuracy_weight", cfg.train.variant.separated_accuracy_weight);
        cfg.train.variant.separated_conciseness_weight =
            t.value("separated_conciseness_weight",
                    cfg.train.variant.separated_conciseness_weight);
    }
    if (j.contains("judge_config")) {
        const json& g = j["judge_config"];
        cfg.judge.endpoint_url = g.value("endpoint_url", cfg.judge.endpoint_url);
        cfg.judge.model_name = g.value("model_name", cfg.judge.model_name);
        cfg.judge.temperature = g.value("temperature", cfg.judge.temperature);
        cfg.judge.max_reply_tokens = g.value("max_reply_tokens", cfg.judge.max_reply_tokens);
        cfg.judge.timeout_seconds = g.value("timeout_seconds", cfg.judge.timeout_seconds);
        cfg.judge.max_retries = g.value("max_retries", cfg.judge.max_retries);
        cfg.judge.budget_cap = g.value("budget_cap", cfg.judge.budget_cap);
        cfg.judge.parallelism_limit =
            g.value("parallelism_limit", cfg.judge.parallelism_limit);
        cfg.judge.price_per_prompt_token =
            g.value("price_per_prompt_token", cfg.judge.price_per_prompt_token);
        cfg.judge.price_per_reply_token =
            g.value("price_per_reply_token", cfg.judge.price_per_reply_token);
        cfg.system_prompt_file = g.value("system_prompt_file", cfg.system_prompt_file);
    }
}

void require_input(const std::string& path, const std::string& what) {
    if (path.empty()) {
        throw ConfigError("missing required path: " + what);
    }
    if (!fs::exists(path)) {
        throw ConfigError(what + " not found: " + path);
    }
}

json config_snapshot(const RunConfig& cfg) {
    json j;
    j["mode"] = cfg.mode;
    j["seed"] = cfg.seed;
    j["reward"] = cfg.reward;
    j["alpha"] = cfg.alpha;
    j["judge"] = cfg.judge_kind;
    j["token_scheme"] = cfg.token_scheme;
    j["paper_config"] = cfg.paper_config;
    j["train"] = {
        {"learning_rate", cfg.train.learning_rate},
        {"kl_coefficient", cfg.train.kl_coefficient},
        {"clip_epsilon", cfg.train.clip_epsilon},
        {"rollouts_per_prompt", cfg.train.rollouts_per_prompt},
        {"prompts_per_batch", cfg.train.prompts_per_batch},
        {"steps", cfg.train.steps},
        {"max_len", cfg.train.max_len},
        {"normalize_advantages", cfg.train.normalize_advantages},
        {"checkpoint_every", cfg.train.checkpoint_every},
        {"kl_sample_count", cfg.train.kl_sample_count},
        {"separated_accuracy_weight", cfg.train.variant.separated_accuracy_weight},
        {"separated_conciseness_weight", cfg.train.variant.separated_conciseness_weight},
        {"cosine",
         {{"max_length", cfg.train.variant.cosine.max_length},
          {"correct_at_zero", cfg.train.variant.cosine.correct_at_zero},
          {"correct_at_max", cfg.train.variant.cosine.correct_at_max},
          {"wrong_at_zero", cfg.train.variant.cosine.wrong_at_zero},
          {"wrong_at_max", cfg.train.variant.cosine.wrong_at_max},
          {"exceed_penalty", cfg.train.variant.cosine.exceed_penalty}}},
    };
    return j;
}

train::TrainConfig resolve_train_config(const RunConfig& cfg) {
    train::TrainConfig t = cfg.paper_config ? train::TrainConfig::paper() : cfg.train;
    if (cfg.paper_config) {
        t.steps = cfg.train.steps;
        t.max_len = cfg.train.max_len;
    }
    t.seed = cfg.seed;
    t.variant.tag = parse_reward_variant(cfg.reward);
    t.variant.alpha = cfg.alpha;
    return t;
}

judge::JudgeConfig resolve_judge_config(const RunConfig& cfg) {
    judge::JudgeConfig g = cfg.judge;
    if (!cfg.cache.empty()) {
        g.cache_path = cfg.cache;
    }
    if (!cfg.system_prompt_file.empty()) {
        g.system_prompt = io::read_file(cfg.system_prompt_file);
    }
    return g;
}

std::string curve_csv(const std::vector<train::StepLog>& logs,
                      double train::StepLog::* field) {
    std::vector<double> raw;
    raw.reserve(logs.size());
    for (const auto& log : logs) raw.push_back(log.*field);
    const auto smoothed =
        raw.empty() ? std::vector<double>{} : metrics::smooth_series(raw, 9);
    std::string csv = "step,raw,smoothed\n";
    for (std::size_t i = 0; i < raw.size(); ++i) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g\n", logs[i].step, raw[i],
                      smoothed[i]);
        csv += buf;
    }
    return csv;
}

int cmd_train(const RunConfig& cfg) {
    if (cfg.out.empty()) {
        throw ConfigError("train needs --out RUN_DIR");
    }
    const train::TrainConfig tcfg = resolve_train_config(cfg);
    tcfg.validate();

    io::RunLock lock(cfg.out);
    const fs::path out(cfg.out);
    io::atomic_write_file(out / "config.json", config_snapshot(cfg).dump(2) + "\n");

    std::unique_ptr<judge::JudgeClient> client;
    std::unique_ptr<train::ConcisenessJudge> trace_judge;
    if (cfg.judge_kind == "remote") {
        client = std::make_unique<judge::JudgeClient>(resolve_judge_config(cfg));
        trace_judge = std::make_unique<train::RemoteTraceJudge>(*client);
    } else if (cfg.judge_kind == "mock") {
        trace_judge = std::make_unique<train::MockTraceJudge>();
    } else {
        throw ConfigError("unknown judge kind: " + cfg.judge_kind);
    }

    auto state = train::TrainState::fresh(cfg.seed);
    const auto problems = toy::all_problems();
    toy::save_params(state.params, out / "params_initial.json");

    std::string csv = train::step_log_csv_header() + "\n";
    const auto logs = train::run_training(
        state, problems, tcfg, *trace_judge,
        [&](const train::StepLog& log, const train::TrainState& s) {
            csv += train::step_log_csv_row(log) + "\n";
            if (tcfg.checkpoint_every > 0 && (log.step + 1) % tcfg.checkpoint_every == 0) {
                char name[64];
                std::snprintf(name, sizeof(name), "params_step_%05d.json", log.step + 1);
                toy::save_params(s.params, out / name);
            }
        });

    io::atomic_write_file(out / "steps.csv", csv);
    if (!logs.empty()) {
        io::atomic_write_file(out / "curve_length.csv",
                              curve_csv(logs, &train::StepLog::length_mean));
        io::atomic_write_file(out / "curve_accuracy.csv",
                              curve_csv(logs, &train::StepLog::accuracy_mean));
        io::atomic_write_file(out / "curve_reward.csv",
                              curve_csv(logs, &train::StepLog::reward_mean));
    }
    toy::save_params(state.params, out / "params_final.json");
    if (client) {
        std::cerr << "judge spend: " << client->total_cost() << " ("
                  << client->live_calls() << " live calls, " << client->cache_hits()
                  << " cache hits)\n";
    }
    std::cout << "trained " << logs.size() << " steps -> " << cfg.out << "\n";
    return kExitOk;
}

int cmd_score(const RunConfig& cfg) {
    require_input(cfg.traces, "--traces");
    const fs::path out_path = cfg.out.empty()
                                  ? fs::path(cfg.traces).replace_extension(".verdicts.jsonl")
                                  : fs::path(cfg.out);

    std::unique_ptr<judge::JudgeClient> client;
    if (cfg.judge_kind == "remote") {
        client = std::make_unique<judge::JudgeClient>(resolve_judge_config(cfg));
    } else if (cfg.judge_kind != "mock") {
        throw ConfigError("unknown judge kind: " + cfg.judge_kind);
    }

    std::string out;
    bool any_line_failed = false;
    std::size_t lineno = 0;
    for (const auto& line : io::read_lines(cfg.traces)) {
        ++lineno;
        json record = json::parse(line, nullptr, false);
        json verdict;
        try {
            if (record.is_discarded() || !record.is_object()) {
                throw MalformedRecord("line " + std::to_string(lineno) +
                                      ": not a JSON object");
            }
            const std::string id = record.value("id", "line-" + std::to_string(lineno));
            verdict["id"] = id;
            if (!record.contains("trace_text")) {
                throw MalformedRecord("line " + std::to_string(lineno) +
                                      ": missing trace_text");
            }
            const std::string trace_text = record["trace_text"].get<std::string>();
            const std::string problem = record.value("problem", "");
            if (client) {
                const auto v = client->score_trace(trace_text, problem);
                verdict["score"] = v.score;
                verdict["normalized"] = v.normalized;
                verdict["from_cache"] = v.from_cache;
                verdict["cost"] = v.cost;
                verdict["prompt_tokens"] = v.prompt_tokens;
                verdict["reply_tokens"] = v.reply_tokens;
            } else {
                const auto tokens = toy::parse_trace_text(trace_text);
                if (!tokens.has_value()) {
                    throw MalformedRecord("line " + std::to_string(lineno) +
                                          ": not a synthetic trace");
                }
                toy::Trace t;
                t.tokens = *tokens;
                const auto [essentials, total] = toy::oracle_essentials(t);
                const int score = judge::mock_judge_score(essentials, total);
                verdict["score"] = score;
                verdict["normalized"] = static_cast<double>(score) / 10.0;
                verdict["from_cache"] = false;
                verdict["cost"] = 0.0;
            }
        } catch (const BudgetExceeded&) {
            throw; // a spent budget stops the whole file
        } catch (const Error& e) {
            verdict["error"] = e.what();
            any_line_failed = true;
        }
        out += verdict.dump() + "\n";
    }
    io::atomic_write_file(out_path, out);
    if (client) {
        std::cerr << "judge spend: " << client->total_cost() << " ("
                  << client->live_calls() << " live calls, " << client->cache_hits()
                  << " cache hits)\n";
    }
    std::cout << "verdicts -> " << out_path.string() << "\n";
    return any_line_failed ? kExitRuntime : kExitOk;
}

struct EvalRow {
    std::string dataset;
    std::string method;
    metrics::AggregateMetrics m;
};

json summary_json(const EvalRow& row) {
    json j;
    j["dataset"] = row.dataset;
    j["method"] = row.method;
    j["accuracy_pct"] = row.m.accuracy_pct;
    j["mean_length"] = row.m.mean_length;
    j["length_pct_of_reference"] = row.m.length_pct_of_reference;
    j["count"] = row.m.count;
    if (!row.m.per_level.empty()) {
        json levels = json::object();
        for (const auto& [level, stats] : row.m.per_level) {
            levels[std::to_string(level)] = {
                {"accuracy_pct", stats.accuracy_pct},
                {"mean_length", stats.mean_length},
                {"count", stats.count},
            };
        }
        j["per_level"] = levels;
    }
    return j;
}

int cmd_eval(const RunConfig& cfg) {
    require_input(cfg.traces, "--traces");
    require_input(cfg.reference, "--reference");
    if (cfg.out.empty()) {
        throw ConfigError("eval needs --out DIR");
    }
    const auto scheme = metrics::parse_token_scheme(cfg.token_scheme);

    std::vector<records::ProblemRecord> problems;
    if (!cfg.dataset.empty()) {
        require_input(cfg.dataset, "--dataset");
        problems = records::load_problems(cfg.dataset);
    }
    const auto outcomes =
        records::resolve_outcomes(problems, records::load_traces(cfg.traces), scheme);
    const auto reference =
        records::resolve_outcomes(problems, records::load_traces(cfg.reference), scheme);

    EvalRow row;
    row.m = metrics::aggregate(outcomes, reference);
    row.dataset = cfg.dataset_name;
    if (row.dataset.empty() && !problems.empty() && !problems.front().dataset.empty()) {
        row.dataset = problems.front().dataset;
    }
    if (row.dataset.empty()) {
        row.dataset = fs::path(cfg.traces).stem().string();
    }
    row.method = cfg.method_name.empty() ? fs::path(cfg.out).filename().string()
                                         : cfg.method_name;

    const fs::path out(cfg.out);
    std::string csv = "dataset,accuracy_pct,mean_length,length_pct\n";
    csv += row.dataset + "," + metrics::format_display(row.m.accuracy_pct, 1) + "," +
           metrics::format_display(row.m.mean_length, 1) + "," +
           metrics::format_display(row.m.length_pct_of_reference, 1) + "\n";
    io::atomic_write_file(out / "metrics.csv", csv);

    if (!row.m.per_level.empty()) {
        std::string level_csv = "level,accuracy_pct,mean_length,count\n";
        for (const auto& [level, stats] : row.m.per_level) {
            level_csv += std::to_string(level) + "," +
                         metrics::format_display(stats.accuracy_pct, 2) + "," +
                         metrics::format_display(stats.mean_length, 2) + "," +
                         std::to_string(stats.count) + "\n";
        }
        io::atomic_write_file(out / "per_level.csv", level_csv);
    }
    io::atomic_write_file(out / "summary.json", summary_json(row).dump(2) + "\n");
    std::cout << "metrics -> " << (out / "metrics.csv").string() << "\n";
    return kExitOk;
}

int cmd_report(const RunConfig& cfg) {
    if (cfg.runs.size() < 2) {
        throw ConfigError("report needs at least two --run DIR inputs");
    }
    if (cfg.out.empty()) {
        throw ConfigError("report needs --out DIR");
    }
    struct ReportRow {
        std::string dataset;
        std::string method;
        double accuracy_pct;
        double mean_length;
        double length_pct;
    };
    std::vector<ReportRow> rows;
    for (const auto& run : cfg.runs) {
        const fs::path summary = fs::path(run) / "summary.json";
        require_input(summary.string(), "run summary");
        json j;
        try {
            j = json::parse(io::read_file(summary));
        } catch (const json::exception& e) {
            throw MalformedRecord(summary.string() + ": " + e.what());
        }
        rows.push_back(ReportRow{
            j.value("dataset", ""),
            j.value("method", fs::path(run).filename().string()),
            j.value("accuracy_pct", 0.0),
            j.value("mean_length", 0.0),
            j.value("length_pct_of_reference", 0.0),
        });
    }
    std::sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
        return std::tie(a.dataset, a.method) < std::tie(b.dataset, b.method);
    });

    std::string csv = "dataset,method,accuracy_pct,mean_length,length_pct\n";
    for (const auto& r : rows) {
        csv += r.dataset + "," + r.method + "," +
               metrics::format_display(r.accuracy_pct, 1) + "," +
               metrics::format_display(r.mean_length, 1) + "," +
               metrics::format_display(r.length_pct, 1) + "\n";
    }

    // per-method Average rows, matching the tables' unweighted Average column
    std::map<std::string, std::vector<double>> acc_by_method;
    std::map<std::string, std::vector<double>> len_pct_by_method;
    for (const auto& r : rows) {
        acc_by_method[r.method].push_back(r.accuracy_pct);
        len_pct_by_method[r.method].push_back(r.length_pct);
    }
    for (const auto& [method, accs] : acc_by_method) {
        csv += "average," + method + "," +
               metrics::format_display(metrics::average_row(accs), 1) + ",," +
               metrics::format_display(metrics::average_row(len_pct_by_method[method]), 1) +
               "\n";
    }
    io::atomic_write_file(fs::path(cfg.out) / "comparison.csv", csv);
    std::cout << "comparison -> " << (fs::path(cfg.out) / "comparison.csv").string() << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ConciseRL reward algebra, judge protocol, toy trainer, and eval harness"};
    app.require_subcommand(0, 1);

    RunConfig cfg;
    std::string config_path;

    app.add_option("--config", config_path, "JSON config file; flags override its values");
    app.add_option("--mode", cfg.mode, "train | score | eval | report");
    app.add_option("--reward", cfg.reward, "pure|gated|separated|cosine|alpha|accuracy");
    app.add_option("--alpha", cfg.alpha, "alpha-penalty strength in [0,1)");
    app.add_option("--judge", cfg.judge_kind, "mock | remote");
    app.add_option("--steps", cfg.train.steps, "training steps");
    app.add_option("--seed", cfg.seed, "RNG seed");
    app.add_option("--dataset", cfg.dataset, "problem JSONL");
    app.add_option("--traces", cfg.traces, "trace JSONL");
    app.add_option("--reference", cfg.reference, "reference trace JSONL");
    app.add_option("--out", cfg.out, "output directory (or verdicts file for score)");
    app.add_option("--cache", cfg.cache, "judge verdict cache file");
    app.add_option("--token-scheme", cfg.token_scheme, "approx | provided");
    app.add_option("--dataset-name", cfg.dataset_name, "dataset tag for metric rows");
    app.add_option("--method-name", cfg.method_name, "method tag for metric rows");
    app.add_option("--run", cfg.runs, "eval output dir (repeat for report)");
    app.add_flag("--paper-config", cfg.paper_config,
                 "use the published full-scale hyperparameters");
    app.add_option("--learning-rate", cfg.train.learning_rate, "policy step size");
    app.add_option("--kl-coef", cfg.train.kl_coefficient, "KL-to-initial coefficient");
    app.add_option("--clip-eps", cfg.train.clip_epsilon, "PPO clip threshold");
    app.add_option("--rollouts", cfg.train.rollouts_per_prompt, "rollouts per prompt");
    app.add_option("--batch", cfg.train.prompts_per_batch, "prompts per batch");
    app.add_option("--max-len", cfg.train.max_len, "trace length cap");
    app.add_flag("--normalize-advantages", cfg.train.normalize_advantages,
                 "divide each group's advantages by their std");
    app.add_option("--endpoint", cfg.judge.endpoint_url, "judge endpoint base URL");
    app.add_option("--model", cfg.judge.model_name, "judge model name");
    app.add_option("--budget", cfg.judge.budget_cap, "judge spend cap");
    app.add_option("--system-prompt-file", cfg.system_prompt_file,
                   "judge system prompt asset");

    auto* sub_train = app.add_subcommand("train", "train the toy policy");
    auto* sub_score = app.add_subcommand("score", "score a trace file with a judge");
    auto* sub_eval = app.add_subcommand("eval", "compute metrics for a recorded run");
    auto* sub_report = app.add_subcommand("report", "compare eval runs side by side");
    for (auto* sub : {sub_train, sub_score, sub_eval, sub_report}) {
        sub->fallthrough(); // flags after the subcommand resolve on the root app
    }

    CLI11_PARSE(app, argc, argv);

    try {
        // config file first, then re-apply flags so they win
        if (!config_path.empty()) {
            RunConfig from_file;
            apply_config_file(from_file, config_path);
            std::swap(cfg, from_file);
            app.clear();
            CLI11_PARSE(app, argc, argv);
        }

        std::string mode = cfg.mode;
        if (sub_train->parsed()) mode = "train";
        if (sub_score->parsed()) mode = "score";
        if (sub_eval->parsed()) mode = "eval";
        if (sub_report->parsed()) mode = "report";
        if (mode.empty()) {
            std::cerr << app.help();
            return kExitUsage;
        }

        cfg.train.seed = cfg.seed;
        if (mode == "train") return cmd_train(cfg);
        if (mode == "score") return cmd_score(cfg);
        if (mode == "eval") return cmd_eval(cfg);
        if (mode == "report") return cmd_report(cfg);
        throw ConfigError("unknown mode: " + mode);
    } catch (const BudgetExceeded& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBudget;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const InvalidParams& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
