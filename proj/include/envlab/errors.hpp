#pragma once

#include <stdexcept>
#include <string>

namespace envlab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or out-of-contract input data: bad dimensions, non-normalized
// states, non-unitary matrices, unparsable files.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Input is well formed but the operation's precondition does not hold
// (e.g. a swap pair that is not envariantly swappable).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class DerivationError : public Error {
 public:
  using Error::Error;
};

}  // namespace envlab
