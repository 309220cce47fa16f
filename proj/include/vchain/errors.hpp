#pragma once

#include <stdexcept>
#include <string>

namespace vchain {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Key ceremony failed (bad capacity, memory budget exceeded, ...).
class SetupError : public Error {
public:
    using Error::Error;
};

// Multiset exceeds accumulator capacity, or element value out of universe.
class CapacityError : public Error {
public:
    using Error::Error;
};

// prove_disjoint called on multisets with intersecting supports.
class NotDisjointError : public Error {
public:
    using Error::Error;
};

// proof_sum / sum precondition violated.
class AggregationError : public Error {
public:
    using Error::Error;
};

// Operation not available for this construction (e.g. Sum on Acc1).
class UnsupportedError : public Error {
public:
    using Error::Error;
};

// Bad numeric domain: value out of width range, inverted range, ...
class DomainError : public Error {
public:
    using Error::Error;
};

// Query text / file format parsing.
class ParseError : public Error {
public:
    using Error::Error;
};

// Miner-side block construction failure.
class BuildError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

// Caller misuse (e.g. find_mismatch_clause on a matching multiset).
class LogicError : public Error {
public:
    using Error::Error;
};

} // namespace vchain
