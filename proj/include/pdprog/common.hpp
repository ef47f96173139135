#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdprog {

// Error taxonomy. The CLI maps exceptions onto process exit codes:
// validation/parse/conflict/schema -> 1, I/O -> 2, numeric -> 3.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
    virtual int exit_code() const { return 1; }
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class ConflictError : public Error {
public:
    using Error::Error;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
    int exit_code() const override { return 2; }
};

class NumericError : public Error {
public:
    using Error::Error;
    int exit_code() const override { return 3; }
};

// Non-fatal diagnostics go to stderr; output files stay deterministic.
void warn(const std::string& message);

// All randomness in the project flows from one user seed. Stage- and
// index-local generators are derived with a splitmix64 mix so that parallel
// and serial execution orders see identical streams.
uint64_t mix_seed(uint64_t seed, uint64_t stream);
std::mt19937_64 make_rng(uint64_t seed, uint64_t stream);

double logsumexp(std::span<const double> values);

// Shortest round-trip decimal formatting (used for every double written to
// CSV so repeated runs are byte-identical).
std::string format_double(double value);

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char delim);

// Strict scalar parsing: the whole token must be consumed.
bool try_parse_int(const std::string& s, long long& out);
bool try_parse_double(const std::string& s, double& out);

}  // namespace pdprog
