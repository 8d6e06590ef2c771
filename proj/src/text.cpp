#include "convkg/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace convkg::text {

std::string trim(std::string_view s) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool contains_ci(std::string_view haystack, std::string_view needle) {
    return to_lower(haystack).find(to_lower(needle)) != std::string::npos;
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        out.emplace_back(s.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

bool is_stopword(std::string_view w) {
    static constexpr std::array<std::string_view, 40> kStop = {
        "a",    "an",   "the",  "of",   "in",   "on",   "at",  "to",   "for",  "by",
        "with", "from", "and",  "or",   "is",   "are",  "was", "were", "be",   "been",
        "has",  "have", "had",  "do",   "does", "did",  "it",  "its",  "as",   "into",
        "about", "than", "that", "this", "these", "those", "there", "their", "his", "her",
    };
    return std::find(kStop.begin(), kStop.end(), w) != kStop.end();
}

std::vector<std::string> content_tokens(std::string_view phrase) {
    std::vector<std::string> out;
    for (const auto& raw : split(phrase, ' ')) {
        std::string_view w = raw;
        auto is_punct = [](char c) {
            return std::ispunct(static_cast<unsigned char>(c)) != 0;
        };
        while (!w.empty() && is_punct(w.front())) w.remove_prefix(1);
        while (!w.empty() && is_punct(w.back())) w.remove_suffix(1);
        auto t = to_lower(trim(w));
        if (t.empty() || is_stopword(t)) continue;
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace convkg::text
