#pragma once

#include <chrono>
#include <cstdlib>
#include <string>
#include <utility>

#include <httplib.h>

#include "error.hpp"

namespace verbatim::http {

struct Endpoint {
    std::string base;  // scheme://host[:port]
    std::string path;  // starts with '/'
};

inline Endpoint split_url(const std::string& url)
{
    auto const scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw FormatError("URL must include a scheme: " + url);
    }
    auto const path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

struct RequestOptions {
    std::chrono::milliseconds timeout{60000};
    std::string bearer_token;
};

/// POSTs a JSON body and returns the response body. Transport failures and
/// non-2xx statuses throw BackendError.
inline std::string post_json(const std::string& url, const std::string& body, const RequestOptions& opts = {})
{
    auto const ep = split_url(url);
    httplib::Client client(ep.base);
    auto const secs = std::chrono::duration_cast<std::chrono::seconds>(opts.timeout);
    auto const usecs = std::chrono::duration_cast<std::chrono::microseconds>(opts.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!opts.bearer_token.empty()) {
        headers.emplace("Authorization", "Bearer " + opts.bearer_token);
    }
    auto res = client.Post(ep.path, headers, body, "application/json");
    if (!res) {
        throw BackendError("request to " + url + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        throw BackendError("request to " + url + " returned HTTP " + std::to_string(res->status) + ": " +
                           res->body.substr(0, 300));
    }
    return res->body;
}

/// Value of an environment variable, or empty when unset.
inline std::string env(const std::string& name)
{
    if (name.empty()) {
        return {};
    }
    const char* v = std::getenv(name.c_str());
    return v ? std::string(v) : std::string{};
}

}  // namespace verbatim::http
