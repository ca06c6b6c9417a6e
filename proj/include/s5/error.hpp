#pragma once

#include <stdexcept>
#include <string>

namespace s5 {

// Base for every failure raised by the library. Precondition violations on
// numeric inputs use std::invalid_argument / std::domain_error directly.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File missing, unreadable, malformed, or inconsistent with its manifest.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace s5
