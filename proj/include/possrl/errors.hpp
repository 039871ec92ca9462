#pragma once

#include <stdexcept>
#include <string>

namespace possrl {

/// Malformed text input (data, theory, evidence, config). Carries the 1-based line.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A predicate name used with two different arities, or an unsupported arity.
class SignatureError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Argument outside an operation's domain (subset not in C, k out of range, ...).
class DomainError : public std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A solver or counter ran out of its work budget.
class BudgetError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Evidence containing a complementary pair.
class EvidenceError : public std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// An exact construction would exceed its size cap.
class SizeError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A file could not be opened, read or written.
class IoError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// The likelihood program has no feasible point.
class InfeasibleError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace possrl
