#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace daedalus {

enum class ErrorCode {
    io,
    parse,
    validation,
    encoding,
    invalid_argument,
    not_found,
    conflict,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-readable code plus optional detail lines
/// (field paths, offending ids, ...). All modules report failures with it.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string message, std::vector<std::string> details = {})
        : std::runtime_error(std::move(message)), code_(code), details_(std::move(details)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::vector<std::string>& details() const noexcept { return details_; }

private:
    ErrorCode code_;
    std::vector<std::string> details_;
};

}  // namespace daedalus
