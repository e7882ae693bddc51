#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace driftcast {

/// Broad failure class, used by the CLI to pick an exit code.
enum class ErrorClass { Config, Data, Numeric, Usage };

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), cls_(cls) {}
    [[nodiscard]] ErrorClass error_class() const noexcept { return cls_; }

private:
    ErrorClass cls_;
};

// ---- seriesdata ----------------------------------------------------------

class MissingFile : public Error {
public:
    explicit MissingFile(const std::string& path)
        : Error(ErrorClass::Data, "missing file: " + path) {}
};

class RaggedRows : public Error {
public:
    explicit RaggedRows(std::size_t row)
        : Error(ErrorClass::Data, "ragged row " + std::to_string(row)), row_(row) {}
    [[nodiscard]] std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class NonNumericCell : public Error {
public:
    NonNumericCell(std::size_t row, std::size_t col)
        : Error(ErrorClass::Data, "non-numeric cell at row " + std::to_string(row) + ", col " +
                                      std::to_string(col)),
          row_(row), col_(col) {}
    [[nodiscard]] std::size_t row() const noexcept { return row_; }
    [[nodiscard]] std::size_t col() const noexcept { return col_; }

private:
    std::size_t row_;
    std::size_t col_;
};

class EmptyData : public Error {
public:
    EmptyData() : Error(ErrorClass::Data, "no data rows") {}
};

class DegenerateSplit : public Error {
public:
    explicit DegenerateSplit(const std::string& why)
        : Error(ErrorClass::Data, "degenerate split: " + why) {}
};

class EmptyRange : public Error {
public:
    EmptyRange() : Error(ErrorClass::Data, "no valid window origin in range") {}
};

class BadSchedule : public Error {
public:
    explicit BadSchedule(const std::string& why)
        : Error(ErrorClass::Config, "bad synthetic schedule: " + why) {}
};

class LeakageViolation : public Error {
public:
    LeakageViolation(std::int64_t index, std::int64_t clock)
        : Error(ErrorClass::Usage, "leakage: read of index " + std::to_string(index) +
                                       " at clock " + std::to_string(clock)),
          index_(index), clock_(clock) {}
    [[nodiscard]] std::int64_t index() const noexcept { return index_; }
    [[nodiscard]] std::int64_t clock() const noexcept { return clock_; }

private:
    std::int64_t index_;
    std::int64_t clock_;
};

// ---- nncore / forecasters / adapter -------------------------------------

class ShapeMismatch : public Error {
public:
    explicit ShapeMismatch(const std::string& layer)
        : Error(ErrorClass::Usage, "shape mismatch at " + layer), layer_(layer) {}
    [[nodiscard]] const std::string& layer() const noexcept { return layer_; }

private:
    std::string layer_;
};

class StaleCache : public Error {
public:
    StaleCache() : Error(ErrorClass::Usage, "forward cache does not match current parameters") {}
};

class WiringMismatch : public Error {
public:
    explicit WiringMismatch(const std::string& why)
        : Error(ErrorClass::Usage, "wiring mismatch: " + why) {}
};

class ArityMismatch : public Error {
public:
    ArityMismatch(std::size_t expected, std::size_t got)
        : Error(ErrorClass::Usage, "encoder arity mismatch: expected " + std::to_string(expected) +
                                       ", got " + std::to_string(got)) {}
};

class ModeDimMismatch : public Error {
public:
    ModeDimMismatch(std::size_t bound_n, std::size_t got)
        : Error(ErrorClass::Usage, "aggregation bound to N=" + std::to_string(bound_n) +
                                       ", got N=" + std::to_string(got)) {}
};

class DimMismatch : public Error {
public:
    explicit DimMismatch(const std::string& why)
        : Error(ErrorClass::Usage, "dimension mismatch: " + why) {}
};

class RegistryMismatch : public Error {
public:
    explicit RegistryMismatch(const std::string& why)
        : Error(ErrorClass::Usage, "registry mismatch: " + why) {}
};

class BatchArityMismatch : public Error {
public:
    BatchArityMismatch(std::size_t coeffs, std::size_t inputs)
        : Error(ErrorClass::Usage, "batch arity mismatch: " + std::to_string(coeffs) +
                                       " coefficient sets for " + std::to_string(inputs) +
                                       " inputs") {}
};

// ---- engine / cli --------------------------------------------------------

class Diverged : public Error {
public:
    explicit Diverged(const std::string& where)
        : Error(ErrorClass::Numeric, "non-finite loss during " + where) {}
};

class StrategyArgMismatch : public Error {
public:
    explicit StrategyArgMismatch(const std::string& why)
        : Error(ErrorClass::Usage, "strategy argument mismatch: " + why) {}
};

class ConfigMismatch : public Error {
public:
    explicit ConfigMismatch(const std::string& why)
        : Error(ErrorClass::Usage, "reports are not comparable: " + why) {}
};

class ZeroDenominator : public Error {
public:
    ZeroDenominator() : Error(ErrorClass::Numeric, "gap denominator is zero") {}
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& why)
        : Error(ErrorClass::Config, "config parse error at line " + std::to_string(line) + ": " +
                                        why),
          line_(line) {}
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class UnknownKey : public Error {
public:
    explicit UnknownKey(const std::string& key)
        : Error(ErrorClass::Config, "unknown config key: " + key), key_(key) {}
    [[nodiscard]] const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

class BadValue : public Error {
public:
    BadValue(const std::string& key, const std::string& why)
        : Error(ErrorClass::Config, "bad value for " + key + ": " + why), key_(key) {}
    [[nodiscard]] const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

class MissingCheckpoint : public Error {
public:
    explicit MissingCheckpoint(const std::string& path)
        : Error(ErrorClass::Data, "missing checkpoint: " + path) {}
};

}  // namespace driftcast
