#pragma once

#include <stdexcept>
#include <string>

namespace concertcut {

// Root of every error the library raises. CLI exit codes are chosen from the
// concrete subclass: DataFormatError maps to 3, everything else to 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ContractError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Inputs carry no information to work with (zero variance, zero std, ...).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class DataFormatError : public Error {
 public:
  using Error::Error;
};

namespace detail {

template <class E = ContractError>
inline void require(bool ok, const std::string& what) {
  if (!ok) throw E(what);
}

}  // namespace detail
}  // namespace concertcut
