// Copyright 2026 The plantune Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PLANTUNE_ERROR_HPP_
#define PLANTUNE_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace plantune {

// Error categories. The C API maps each one to a distinct status code.
enum class ErrorKind {
  kDimension,   // shape mismatch between operands
  kNumeric,     // domain violation, non-finite value, solver failure
  kUsage,       // API called outside its contract
  kConfig,      // malformed or inconsistent configuration / scenario
  kIo,          // file could not be read or written
  kLookup,      // unknown query, knob, or vocabulary entry
  kEngine,      // execution environment failure
};

const char* ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void Fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace plantune

#endif  // PLANTUNE_ERROR_HPP_
