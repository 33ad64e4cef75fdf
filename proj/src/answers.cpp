#include "conciserl/answers.hpp"

#include <cctype>

namespace conciserl {

namespace {

bool is_space(char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

} // namespace

std::optional<std::string> extract_boxed_answer(std::string_view text) {
    static constexpr std::string_view kMarker = "\\boxed{";
    const std::size_t pos = text.rfind(kMarker);
    if (pos == std::string_view::npos) {
        return std::nullopt;
    }
    std::size_t i = pos + kMarker.size();
    int depth = 1;
    const std::size_t start = i;
    for (; i < text.size(); ++i) {
        if (text[i] == '{') {
            ++depth;
        } else if (text[i] == '}') {
            --depth;
            if (depth == 0) {
                return std::string(text.substr(start, i - start));
            }
        }
    }
    // Opening brace never closed.
    return std::nullopt;
}

std::string normalize_answer(std::string_view answer) {
    std::size_t begin = 0;
    std::size_t end = answer.size();
    while (begin < end && is_space(answer[begin])) ++begin;
    while (end > begin && is_space(answer[end - 1])) --end;
    std::string_view trimmed = answer.substr(begin, end - begin);

    if (trimmed.size() >= 2 && trimmed.front() == '$' && trimmed.back() == '$') {
        trimmed.remove_prefix(1);
        trimmed.remove_suffix(1);
    }

    std::string out;
    out.reserve(trimmed.size());
    bool pending_space = false;
    for (char c : trimmed) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(c);
    }
    return out;
}

int accuracy(const std::optional<std::string>& trace_answer, std::string_view gold) {
    if (!trace_answer.has_value()) {
        return 0;
    }
    return normalize_answer(*trace_answer) == normalize_answer(gold) ? 1 : 0;
}

} // namespace conciserl
