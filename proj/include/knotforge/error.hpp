#pragma once

#include <stdexcept>
#include <string>

namespace knotforge {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Rope state or curve violating a structural invariant.
class InvalidConfig : public Error {
public:
    using Error::Error;
};

/// JSON document not matching the documented schema.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Projection could not be resolved into transversal crossings.
class DegenerateDiagram : public Error {
public:
    using Error::Error;
};

class InvalidMove : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class PlanningError : public Error {
public:
    using Error::Error;
};

class TrainingDiverged : public Error {
public:
    using Error::Error;
};

}  // namespace knotforge
