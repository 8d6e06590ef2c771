#include "convkg/retry.hpp"

#include <vector>

namespace convkg {

namespace {

std::optional<nlohmann::json> parse_object(std::string_view text) {
    auto j = nlohmann::json::parse(text.begin(), text.end(), nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    return j;
}

}  // namespace

std::optional<nlohmann::json> find_json_object(std::string_view raw) {
    try {
        if (auto j = parse_object(raw)) return j;

        if (auto fence = raw.find("```"); fence != std::string_view::npos) {
            auto body = raw.find('\n', fence);
            auto close = body == std::string_view::npos ? body : raw.find("```", body);
            if (close != std::string_view::npos) {
                if (auto j = parse_object(raw.substr(body + 1, close - body - 1))) return j;
            }
        }

        auto last_close = raw.rfind('}');
        if (last_close == std::string_view::npos) return std::nullopt;
        // try opening braces from the right so the trailing object wins
        std::vector<std::size_t> opens;
        for (std::size_t i = 0; i < last_close; ++i) {
            if (raw[i] == '{') opens.push_back(i);
        }
        constexpr std::size_t kMaxTries = 64;
        std::size_t tries = 0;
        for (auto it = opens.rbegin(); it != opens.rend() && tries < kMaxTries; ++it, ++tries) {
            if (auto j = parse_object(raw.substr(*it, last_close - *it + 1))) {
                return j;
            }
        }
    } catch (...) {
        // parse_object never throws for malformed input; guard against bad_alloc et al.
    }
    return std::nullopt;
}

}  // namespace convkg
