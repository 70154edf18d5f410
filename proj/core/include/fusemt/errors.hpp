/* Copyright 2026 The FuseMT Authors. All Rights Reserved.

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

#pragma once

#include <stdexcept>
#include <string>

namespace fusemt {

// Root of every error raised by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes incompatible with an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced by a forward op, a gradient or a loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Caller violated a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Two components require identical vocabularies and do not have them.
class VocabularyMismatch : public Error {
 public:
  using Error::Error;
};

// Invalid run configuration or command-line usage.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or missing input data (corpora, checkpoints, vocab files).
class DataError : public Error {
 public:
  using Error::Error;
};

// Operation not available for this model variant.
class UnsupportedVariant : public Error {
 public:
  using Error::Error;
};

}  // namespace fusemt
