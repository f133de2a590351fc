#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace jobclf {

/// Base class for every error the harness raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input data: unreadable files, malformed rows, unknown labels.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Caller misuse: invalid plans, bad flag combinations, bad arguments.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Anything that went wrong talking to a model backend.
class BackendError : public Error {
 public:
  using Error::Error;
};

class AuthError : public BackendError {
 public:
  using BackendError::BackendError;
};

class MalformedPayloadError : public BackendError {
 public:
  using BackendError::BackendError;
};

class RetriesExhaustedError : public BackendError {
 public:
  RetriesExhaustedError(const std::string& what, int attempts)
      : BackendError(what), attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

class CacheMissError : public BackendError {
 public:
  explicit CacheMissError(std::string key)
      : BackendError("replay cache miss for request " + key), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// A run stopped early; records completed before the failure are in the store.
class RunAborted : public BackendError {
 public:
  RunAborted(const std::string& cause, std::size_t completed, std::size_t total)
      : BackendError("run aborted (partial results: " + std::to_string(completed) + " of " +
                     std::to_string(total) + " records stored): " + cause),
        completed_(completed),
        total_(total) {}
  std::size_t completed() const noexcept { return completed_; }
  std::size_t total() const noexcept { return total_; }

 private:
  std::size_t completed_;
  std::size_t total_;
};

}  // namespace jobclf
