#pragma once
// Small string helpers shared across modules.

#include <string>
#include <string_view>
#include <vector>

namespace convkg::text {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool contains_ci(std::string_view haystack, std::string_view needle);
std::vector<std::string> split(std::string_view s, char sep);

// True for common English function words (articles, prepositions, auxiliaries).
bool is_stopword(std::string_view lowered_word);

// Whitespace split, strip punctuation at word edges, lowercase, drop stopwords.
std::vector<std::string> content_tokens(std::string_view phrase);

// Replaces `{name}` placeholders; unknown placeholders are left untouched.
template <typename Map>
std::string substitute(std::string_view tmpl, const Map& vars) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            auto close = tmpl.find('}', i + 1);
            if (close != std::string_view::npos) {
                std::string key(tmpl.substr(i + 1, close - i - 1));
                auto it = vars.find(key);
                if (it != vars.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += tmpl[i++];
    }
    return out;
}

}  // namespace convkg::text
