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

#ifndef PLANTUNE_IO_HPP_
#define PLANTUNE_IO_HPP_

#include <string>
#include <vector>

#include "json.hpp"

namespace plantune::io {

std::string ReadFile(const std::string& path);
// Writes to "<path>.tmp" then renames over path.
void WriteFileAtomic(const std::string& path, const std::string& contents);
nlohmann::json ReadJson(const std::string& path);
// Non-empty lines of a JSON Lines file, unparsed.
std::vector<std::string> ReadLines(const std::string& path);
bool Exists(const std::string& path);
void EnsureDirectory(const std::string& path);
// Resolves `path` against the directory of `anchor_file` unless absolute.
std::string ResolveRelative(const std::string& anchor_file, const std::string& path);

}  // namespace plantune::io

#endif  // PLANTUNE_IO_HPP_
