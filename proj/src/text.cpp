#include "gdesigner/text.hpp"

#include <algorithm>
#include <cctype>

namespace gdesigner {

std::size_t whitespace_token_count(std::string_view text) {
    std::size_t count = 0;
    bool in_token = false;
    for (char c : text) {
        const bool ws = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (!ws && !in_token) ++count;
        in_token = !ws;
    }
    return count;
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= s.size()) {
        const std::size_t nl = s.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.emplace_back(s.substr(start));
            break;
        }
        lines.emplace_back(s.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

std::string normalize_answer(std::string_view text) {
    const auto lines = split_lines(text);
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        // "Answer:" may appear mid-line in single-line responses.
        const std::string low = to_lower(*it);
        const std::size_t pos = low.rfind("answer:");
        if (pos != std::string::npos)
            return to_lower(trim(it->substr(pos + 7)));
    }
    // Fall back to the last whitespace token.
    std::string t = trim(text);
    const std::size_t sp = t.find_last_of(" \t\r\n");
    if (sp != std::string::npos) t = t.substr(sp + 1);
    return to_lower(t);
}

std::uint64_t fnv1a64(std::string_view s, std::uint64_t salt) {
    std::uint64_t h = 14695981039346656037ULL ^ (salt * 0x9E3779B97F4A7C15ULL);
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace gdesigner
