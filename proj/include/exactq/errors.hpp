#pragma once

#include <stdexcept>
#include <string>

namespace exactq {

// One exception type per failure class; `code()` is stable for callers that
// dispatch on it (the CLI prints it verbatim).
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(code + ": " + what), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

struct UnstableError : Error {
    explicit UnstableError(const std::string& w) : Error("Unstable", w) {}
};
struct InvalidParametersError : Error {
    explicit InvalidParametersError(const std::string& w) : Error("InvalidParameters", w) {}
};
struct NoRootError : Error {
    explicit NoRootError(const std::string& w) : Error("NoRoot", w) {}
};
struct InvalidDriftConstantError : Error {
    explicit InvalidDriftConstantError(const std::string& w) : Error("InvalidDriftConstant", w) {}
};
struct MgfUnavailableError : Error {
    explicit MgfUnavailableError(const std::string& w) : Error("MgfUnavailable", w) {}
};
struct NoValidTruncationError : Error {
    explicit NoValidTruncationError(const std::string& w) : Error("NoValidTruncation", w) {}
};
struct NotApplicableError : Error {
    explicit NotApplicableError(const std::string& w) : Error("NotApplicable", w) {}
};
struct BudgetExceededError : Error {
    explicit BudgetExceededError(const std::string& w) : Error("BudgetExceeded", w) {}
};
struct InsufficientDataError : Error {
    explicit InsufficientDataError(const std::string& w) : Error("InsufficientData", w) {}
};

// Always-on internal consistency check. The backward construction relies on
// exact replay identities; a violation means the sample is not trustworthy,
// so this is never compiled out.
#define EXACTQ_CHECK(cond, msg)                                              \
    do {                                                                     \
        if (!(cond)) {                                                       \
            throw ::exactq::Error("InternalCheck",                           \
                                  std::string(msg) + " at " + __FILE__ +     \
                                      ":" + std::to_string(__LINE__));       \
        }                                                                    \
    } while (0)

}  // namespace exactq
