#pragma once

#include <string>
#include <string_view>

namespace chronomap {

/// Lowercase hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view data);

/// Standard base64 with padding.
std::string base64_encode(std::string_view data);

struct UrlParts {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path without trailing '/'
};

/// Splits "http://host:port/prefix" into origin and path prefix.
UrlParts split_url(std::string_view url);

}  // namespace chronomap
