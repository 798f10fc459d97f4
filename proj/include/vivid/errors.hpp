#pragma once

#include <stdexcept>
#include <string>

namespace vivid {

/// Tensor/image operands whose dimensions do not agree.
class ShapeError : public std::invalid_argument {
public:
    explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

/// Non-finite values where finite ones are required (aborts a sampling run).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed binary or text payloads (.flo, CSV, JSON wire data).
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

/// Failure to reach a remote endpoint at all.
class TransportError : public std::runtime_error {
public:
    explicit TransportError(const std::string& what) : std::runtime_error(what) {}
};

/// Remote endpoint reached but returned a non-200 status.
class RemoteError : public std::runtime_error {
public:
    RemoteError(int status, const std::string& body)
        : std::runtime_error("remote returned HTTP " + std::to_string(status) + ": " + body),
          status_(status) {}
    int status() const { return status_; }

private:
    int status_;
};

/// Structurally valid HTTP exchange carrying an invalid denoise payload.
class ProtocolError : public std::runtime_error {
public:
    explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

/// Configuration that fails schema validation; `pointer` is a JSON-pointer-ish path.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& pointer, const std::string& what)
        : std::runtime_error(pointer + ": " + what), pointer_(pointer) {}
    const std::string& pointer() const { return pointer_; }

private:
    std::string pointer_;
};

}  // namespace vivid
