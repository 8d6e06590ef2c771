#pragma once
// Minimal blocking HTTP client wrapper used by the LLM gateway, the embedder
// and the SPARQL endpoint client.

#include <chrono>
#include <map>
#include <stdexcept>
#include <string>

namespace convkg::http {

struct Url {
    std::string scheme;  // "http" or "https"
    std::string host;
    int port = 0;
    std::string path;    // always begins with '/'

    std::string origin() const;  // scheme://host:port
};

// Throws std::invalid_argument for anything that is not an http(s) URL.
Url parse_url(const std::string& url);

struct Response {
    int status = 0;
    std::string body;
    std::string content_type;
};

class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// POSTs `body` and returns whatever status the server answered with.
// Throws TransportError when no response is received at all.
Response post(const std::string& url, const std::string& body, const std::string& content_type,
              const std::map<std::string, std::string>& headers = {},
              std::chrono::seconds timeout = std::chrono::seconds(120));

std::string form_urlencode(const std::string& value);

}  // namespace convkg::http
