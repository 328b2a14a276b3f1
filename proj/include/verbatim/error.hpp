#pragma once

#include <stdexcept>
#include <string>

namespace verbatim {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Filesystem problems: unreadable directories, unwritable paths.
class IoError : public Error {
  public:
    using Error::Error;
};

/// Input that violates a schema or a data invariant.
class FormatError : public Error {
  public:
    using Error::Error;
};

class VersionError : public Error {
  public:
    using Error::Error;
};

class ChecksumError : public Error {
  public:
    using Error::Error;
};

/// A remote service (LLM, embedder, token scorer) failed or answered garbage.
class BackendError : public Error {
  public:
    using Error::Error;
};

}  // namespace verbatim
