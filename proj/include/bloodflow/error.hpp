#pragma once

#include <stdexcept>
#include <string>

namespace bloodflow {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input or record failed its invariants. `field` names the offending field when known.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& message, std::string field = {})
        : Error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class ConflictError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

class UnderflowError : public Error {
public:
    using Error::Error;
};

// Model fitting failed in a way the caller should see (e.g. diverging training).
class ModelError : public Error {
public:
    using Error::Error;
};

}  // namespace bloodflow
