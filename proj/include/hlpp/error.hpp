#pragma once

#include <stdexcept>
#include <string>

namespace hlpp {

// Argument outside an operation's domain (bad coordinate, bad variate, violated hypothesis).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Problem too large for the configured memory/time guard.
class SizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Construction parameters that cannot produce a nontrivial object.
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace hlpp
