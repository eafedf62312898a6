/* Copyright 2026 The mespot Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef MESPOT_ERROR_H_
#define MESPOT_ERROR_H_

#include <stdexcept>
#include <string>

namespace mespot {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller supplied an argument that violates a documented precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A NaN/Inf showed up where the math forbids it (poisoned gradient, NaN loss).
class NumericalError : public Error {
 public:
  using Error::Error;
};

// File-format errors. Each failure mode has its own type so callers and tests
// can tell them apart.
class FormatError : public Error {
 public:
  using Error::Error;
};

class MalformedHeaderError : public FormatError {
 public:
  using FormatError::FormatError;
};

class FrameCountMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};

class NonFiniteValueError : public FormatError {
 public:
  using FormatError::FormatError;
};

class IntervalOutOfRangeError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Synthetic event layout cannot be satisfied (events do not fit).
class GenerationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mespot

#endif  // MESPOT_ERROR_H_
