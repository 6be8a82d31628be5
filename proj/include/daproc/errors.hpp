#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace daproc {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Violation {
    enum class Kind { PrimaryKey, ForeignKey, Domain, Type };
    Kind kind;
    std::string relation;
    std::string constraint;  // pk name, FK name or attribute
    std::string detail;
};

std::string describe(const Violation& v);

class ConstraintViolation : public Error {
public:
    explicit ConstraintViolation(std::vector<Violation> violations);
    const std::vector<Violation>& violations() const { return violations_; }

private:
    std::vector<Violation> violations_;
};

class UnknownState : public Error {
public:
    explicit UnknownState(std::uint64_t state);
};

class UnknownRelation : public Error {
public:
    explicit UnknownRelation(const std::string& name);
};

class UnknownAction : public Error {
public:
    explicit UnknownAction(const std::string& name);
};

class StaleBinding : public Error {
public:
    using Error::Error;
};

class MissingInvocationResult : public Error {
public:
    using Error::Error;
};

class TypeMismatch : public Error {
public:
    using Error::Error;
};

class UnregisteredService : public Error {
public:
    explicit UnregisteredService(const std::string& name);
};

class AwaitingInteractiveResult : public Error {
public:
    using Error::Error;
};

class UnconfiguredService : public Error {
public:
    explicit UnconfiguredService(const std::string& name);
};

class MergeArityMismatch : public Error {
public:
    using Error::Error;
};

class Inconclusive : public Error {
public:
    using Error::Error;
};

class InvalidSpec : public Error {
public:
    using Error::Error;
};

class PersistenceError : public Error {
public:
    using Error::Error;
};

}  // namespace daproc
