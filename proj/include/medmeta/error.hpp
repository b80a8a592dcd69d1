// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 medmeta contributors

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace medmeta {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A record in an input file violates its schema. `line()` is 1-based.
class MalformedRecord : public Error {
public:
    MalformedRecord(std::size_t line, const std::string& why)
        : Error("malformed record at line " + std::to_string(line) + ": " + why), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class DuplicateId : public Error {
public:
    explicit DuplicateId(std::string id) : Error("duplicate id: " + id), id_(std::move(id)) {}
    const std::string& id() const noexcept { return id_; }

private:
    std::string id_;
};

class MissingGroup : public Error {
public:
    MissingGroup(std::string report_id, int group)
        : Error("report " + report_id + " lacks severity group " + std::to_string(group)),
          report_id_(std::move(report_id)), group_(group) {}
    const std::string& report_id() const noexcept { return report_id_; }
    int group() const noexcept { return group_; }

private:
    std::string report_id_;
    int group_;
};

/// Input cannot support the requested statistic (constant vector, too few values).
class DegenerateInput : public Error {
public:
    using Error::Error;
};

class LengthMismatch : public Error {
public:
    LengthMismatch(std::size_t a, std::size_t b)
        : Error("length mismatch: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

class EmptyCell : public Error {
public:
    using Error::Error;
};

class InvalidGraph : public Error {
public:
    using Error::Error;
};

/// Configuration or data file (gazetteer, rule pack, registry) is unusable.
class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace medmeta
