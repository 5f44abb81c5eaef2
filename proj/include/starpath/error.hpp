#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace starpath {

/// Root of every exception the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller violated a precondition (dimension mismatch, bad argument).
class InputError : public Error {
public:
    using Error::Error;
};

/// Non-finite value produced during a model evaluation.
class NumericError : public Error {
public:
    NumericError(const std::string& what, std::size_t layer)
        : Error(what + " (layer " + std::to_string(layer) + ")"), layer_(layer) {}

    std::size_t layer() const noexcept { return layer_; }

private:
    std::size_t layer_;
};

/// Malformed binary input; carries the byte offset where parsing stopped.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::uint64_t offset)
        : Error(what + " at byte offset " + std::to_string(offset)), offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

/// Trace file whose version field is not understood by this build.
class UnsupportedVersionError : public ParseError {
public:
    UnsupportedVersionError(std::uint32_t version, std::uint64_t offset)
        : ParseError("unsupported trace version " + std::to_string(version), offset),
          version_(version) {}

    std::uint32_t version() const noexcept { return version_; }

private:
    std::uint32_t version_;
};

/// An analysis needed iterates that the trace does not hold.
class CoverageError : public Error {
public:
    explicit CoverageError(std::vector<std::uint64_t> missing)
        : Error(describe(missing)), missing_(std::move(missing)) {}

    CoverageError(const std::string& what, std::vector<std::uint64_t> missing)
        : Error(what + ": " + describe(missing)), missing_(std::move(missing)) {}

    const std::vector<std::uint64_t>& missing() const noexcept { return missing_; }

private:
    static std::string describe(const std::vector<std::uint64_t>& missing) {
        std::string s = "missing iterates k =";
        std::size_t shown = 0;
        for (auto k : missing) {
            if (shown++ == 16) {
                s += " ... (" + std::to_string(missing.size()) + " total)";
                break;
            }
            s += " " + std::to_string(k);
        }
        return s;
    }

    std::vector<std::uint64_t> missing_;
};

/// Configuration file problem; names the offending field.
class ConfigError : public Error {
public:
    ConfigError(const std::string& field, const std::string& what)
        : Error(field + ": " + what), field_(field) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

}  // namespace starpath
