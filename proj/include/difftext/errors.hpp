// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace difftext {

// Process exit codes: 0 success, 2 config error, 3 data error, 4 numerical divergence.
enum class ErrorKind {
    Config = 2,
    Data = 3,
    Divergence = 4,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), m_kind(kind) {}

    ErrorKind kind() const { return m_kind; }
    int exit_code() const { return static_cast<int>(m_kind); }

private:
    ErrorKind m_kind;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error(ErrorKind::Config, message) {}
};

// Invalid schedule endpoints come from configuration.
class ScheduleError : public ConfigError {
public:
    explicit ScheduleError(const std::string& message) : ConfigError(message) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& message) : Error(ErrorKind::Data, message) {}
};

class ShapeError : public DataError {
public:
    explicit ShapeError(const std::string& message) : DataError(message) {}
};

class IndexError : public DataError {
public:
    explicit IndexError(const std::string& message) : DataError(message) {}
};

class VocabularyError : public DataError {
public:
    explicit VocabularyError(const std::string& message) : DataError(message) {}
};

class AnnotationError : public DataError {
public:
    explicit AnnotationError(const std::string& message) : DataError(message) {}
};

class ParseError : public DataError {
public:
    explicit ParseError(const std::string& message) : DataError(message) {}
};

class CompatibilityError : public DataError {
public:
    explicit CompatibilityError(const std::string& message) : DataError(message) {}
};

class IoError : public DataError {
public:
    explicit IoError(const std::string& message) : DataError(message) {}
};

class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& message) : Error(ErrorKind::Divergence, message) {}
};

}  // namespace difftext
