#pragma once

#include <stdexcept>
#include <string>

namespace constructa {

// Maps onto the CLI exit codes: usage 1, data 2, gateway 3, internal 4.
enum class ErrorClass { Usage = 1, Data = 2, Gateway = 3, Internal = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), class_(cls), code_(std::move(code)), message_(message) {}

    ErrorClass error_class() const noexcept { return class_; }
    // Short machine name, e.g. "MissingColumn" or "DanglingReference".
    const std::string& code() const noexcept { return code_; }
    const std::string& message() const noexcept { return message_; }

private:
    ErrorClass class_;
    std::string code_;
    std::string message_;
};

class DataError : public Error {
public:
    DataError(std::string code, const std::string& message)
        : Error(ErrorClass::Data, std::move(code), message) {}
};

class UsageError : public Error {
public:
    UsageError(std::string code, const std::string& message)
        : Error(ErrorClass::Usage, std::move(code), message) {}
};

class InternalError : public Error {
public:
    InternalError(std::string code, const std::string& message)
        : Error(ErrorClass::Internal, std::move(code), message) {}
};

}  // namespace constructa
