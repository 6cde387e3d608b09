/*
 * Copyright 2026 The llpx authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef LLPX_ERRORS_HPP_
#define LLPX_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace llpx {

/// Malformed input data or an argument outside its documented domain.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Text input that cannot be parsed; message carries the line number.
class ParseError : public DataError {
 public:
  using DataError::DataError;
};

/// Numerical failure inside a solver (e.g. indefinite quadratic form).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad command line or configuration.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace llpx

#endif  // LLPX_ERRORS_HPP_
