#pragma once

#include <string>
#include <string_view>

#include "constructa/error.hpp"

namespace constructa::detail {

struct UrlParts {
    std::string origin;  // scheme://host[:port]
    std::string path;    // starts with '/'
};

inline UrlParts split_url(std::string_view url) {
    const auto scheme = url.find("://");
    if (scheme == std::string_view::npos)
        throw UsageError("InvalidEndpoint", "endpoint URL needs a scheme: '" + std::string(url) + "'");
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string_view::npos) return {std::string(url), "/"};
    return {std::string(url.substr(0, slash)), std::string(url.substr(slash))};
}

}  // namespace constructa::detail
