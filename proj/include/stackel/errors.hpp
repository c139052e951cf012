#pragma once

#include <stdexcept>
#include <string>

namespace stk {

// Error with a stable machine-readable code, e.g. "non-riemannian".
class StackelError : public std::runtime_error {
public:
    StackelError(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

}  // namespace stk
