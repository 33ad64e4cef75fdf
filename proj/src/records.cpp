#include "conciserl/records.hpp"

#include <unordered_map>

#include <json.hpp>

#include "conciserl/answers.hpp"
#include "conciserl/errors.hpp"
#include "conciserl/io.hpp"

namespace conciserl::records {

using nlohmann::json;

namespace {

json parse_record_line(const std::string& line, const std::filesystem::path& path,
                       std::size_t lineno) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw MalformedRecord(path.string() + ":" + std::to_string(lineno) +
                              ": not a JSON object");
    }
    return j;
}

} // namespace

std::vector<ProblemRecord> load_problems(const std::filesystem::path& path) {
    std::vector<ProblemRecord> out;
    std::size_t lineno = 0;
    for (const auto& line : io::read_lines(path)) {
        ++lineno;
        json j = parse_record_line(line, path, lineno);
        ProblemRecord r;
        try {
            r.id = j.at("id").get<std::string>();
            r.prompt = j.value("prompt", "");
            r.answer = j.at("answer").get<std::string>();
            r.dataset = j.value("dataset", "");
            if (j.contains("level") && !j["level"].is_null()) {
                r.level = j["level"].get<int>();
            }
        } catch (const json::exception& e) {
            throw MalformedRecord(path.string() + ":" + std::to_string(lineno) + ": " +
                                  e.what());
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<TraceRecord> load_traces(const std::filesystem::path& path) {
    std::vector<TraceRecord> out;
    std::size_t lineno = 0;
    for (const auto& line : io::read_lines(path)) {
        ++lineno;
        json j = parse_record_line(line, path, lineno);
        TraceRecord r;
        try {
            r.id = j.at("id").get<std::string>();
            if (j.contains("trace_text") && !j["trace_text"].is_null()) {
                r.trace_text = j["trace_text"].get<std::string>();
            }
            if (j.contains("token_count") && !j["token_count"].is_null()) {
                r.token_count = j["token_count"].get<long>();
            }
            if (j.contains("correct") && !j["correct"].is_null()) {
                const int c = j["correct"].get<int>();
                if (c != 0 && c != 1) {
                    throw MalformedRecord(path.string() + ":" + std::to_string(lineno) +
                                          ": correct must be 0 or 1");
                }
                r.correct = c;
            }
        } catch (const json::exception& e) {
            throw MalformedRecord(path.string() + ":" + std::to_string(lineno) + ": " +
                                  e.what());
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<metrics::EvalOutcome> resolve_outcomes(std::span<const ProblemRecord> problems,
                                                   std::span<const TraceRecord> traces,
                                                   metrics::TokenScheme scheme) {
    if (traces.empty()) {
        throw EmptyInput("resolve_outcomes: no trace records");
    }
    std::unordered_map<std::string, const ProblemRecord*> by_id;
    by_id.reserve(problems.size());
    for (const auto& p : problems) {
        by_id[p.id] = &p;
    }

    std::vector<metrics::EvalOutcome> out;
    out.reserve(traces.size());
    for (const auto& t : traces) {
        metrics::EvalOutcome o;
        o.id = t.id;

        const ProblemRecord* problem = nullptr;
        if (auto it = by_id.find(t.id); it != by_id.end()) {
            problem = it->second;
            o.level = problem->level;
        }

        if (t.correct.has_value()) {
            o.correct = *t.correct;
        } else {
            if (problem == nullptr) {
                throw MalformedRecord("trace " + t.id +
                                      " has no correct flag and no matching problem");
            }
            if (!t.trace_text.has_value()) {
                throw MalformedRecord("trace " + t.id +
                                      " has no correct flag and no trace_text");
            }
            o.correct = accuracy(extract_boxed_answer(*t.trace_text), problem->answer);
        }

        if (scheme == metrics::TokenScheme::Provided) {
            if (!t.token_count.has_value()) {
                throw MissingCount("trace " + t.id +
                                   " lacks token_count under the provided scheme");
            }
            o.token_count = *t.token_count;
        } else {
            if (t.token_count.has_value()) {
                o.token_count = *t.token_count;
            } else if (t.trace_text.has_value()) {
                o.token_count = metrics::count_tokens_approx(*t.trace_text);
            } else {
                throw MissingCount("trace " + t.id + " has neither token_count nor trace_text");
            }
        }
        out.push_back(std::move(o));
    }
    return out;
}

} // namespace conciserl::records
