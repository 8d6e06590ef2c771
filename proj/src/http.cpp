#include "convkg/http.hpp"

#include <cctype>
#include <cstdio>

#include <httplib.h>

namespace convkg::http {

std::string Url::origin() const {
    return scheme + "://" + host + ":" + std::to_string(port);
}

Url parse_url(const std::string& url) {
    Url out;
    auto sep = url.find("://");
    if (sep == std::string::npos) throw std::invalid_argument("not a URL: " + url);
    out.scheme = url.substr(0, sep);
    for (auto& c : out.scheme) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (out.scheme != "http" && out.scheme != "https") {
        throw std::invalid_argument("unsupported URL scheme: " + out.scheme);
    }
    auto rest = url.substr(sep + 3);
    auto slash = rest.find('/');
    auto authority = rest.substr(0, slash);
    out.path = slash == std::string::npos ? "/" : rest.substr(slash);
    auto colon = authority.rfind(':');
    if (colon != std::string::npos && authority.find(']') == std::string::npos) {
        out.host = authority.substr(0, colon);
        try {
            out.port = std::stoi(authority.substr(colon + 1));
        } catch (const std::exception&) {
            throw std::invalid_argument("bad port in URL: " + url);
        }
    } else {
        out.host = authority;
        out.port = out.scheme == "https" ? 443 : 80;
    }
    if (out.host.empty()) throw std::invalid_argument("URL has no host: " + url);
    return out;
}

Response post(const std::string& url, const std::string& body, const std::string& content_type,
              const std::map<std::string, std::string>& headers, std::chrono::seconds timeout) {
    auto u = parse_url(url);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (u.scheme == "https") throw TransportError("https is not available in this build: " + url);
#endif
    httplib::Client client(u.origin());
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(u.path, h, body, content_type);
    if (!res) {
        throw TransportError("HTTP POST " + url + " failed: " + httplib::to_string(res.error()));
    }
    return Response{res->status, res->body, res->get_header_value("Content-Type")};
}

std::string form_urlencode(const std::string& value) {
    std::string out;
    out.reserve(value.size() * 3);
    for (unsigned char c : value) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out += static_cast<char>(c);
        } else if (c == ' ') {
            out += '+';
        } else {
            char buf[4];
            std::snprintf(buf, sizeof buf, "%%%02X", c);
            out += buf;
        }
    }
    return out;
}

}  // namespace convkg::http
