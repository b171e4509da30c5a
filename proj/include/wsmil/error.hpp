#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace wsmil {

// Every failure raised by the library carries a short category so the CLI
// can print "error: <category>: <message>" on a single line.
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& message)
        : std::runtime_error(message), category_(std::move(category)) {}

    const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

} // namespace wsmil
