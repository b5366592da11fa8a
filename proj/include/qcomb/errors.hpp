#pragma once

#include <stdexcept>
#include <string>

namespace qcomb {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid argument values: bad quantile levels, non-finite inputs,
/// malformed dimensions, out-of-range fractions.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Forecast and actual series disagree on their time axis.
/// The message names the first offending index.
class AlignmentError : public Error {
public:
    using Error::Error;
};

/// A fitted model was applied to data that does not match its
/// fit-time contract (model set, grid, coefficient length).
class ContractError : public Error {
public:
    using Error::Error;
};

/// A file could not be ingested. The message names the offending
/// line (or the missing cell) and the reason.
class IngestionError : public Error {
public:
    using Error::Error;
};

/// A serialized artifact carries an unsupported schema version.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// An internal invariant failed (e.g. a feasible-by-construction
/// program reported infeasible). Indicates a bug, not bad input.
class InternalError : public Error {
public:
    using Error::Error;
};

} // namespace qcomb
