#pragma once

#include <stdexcept>
#include <string>

namespace mtprompt {

enum class ErrorKind {
    invalid_argument,
    malformed_template,
    composition,
    verbalizer,
    data,
    model,
    io,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string &msg) :
        std::runtime_error(msg), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

inline const char *error_kind_name(ErrorKind k) {
    switch (k) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::malformed_template: return "malformed_template";
    case ErrorKind::composition: return "composition";
    case ErrorKind::verbalizer: return "verbalizer";
    case ErrorKind::data: return "data";
    case ErrorKind::model: return "model";
    case ErrorKind::io: return "io";
    }
    return "unknown";
}

} // namespace mtprompt
