// Copyright (c) 2026 The UBBR Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// File plumbing shared by the binary containers and text exports.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>

namespace ubbr::io {

/// Writes through a temporary sibling file and renames it over `path`, so
/// readers never observe a truncated file.
void write_atomic(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& writer, bool binary = false);

void write_u64_le(std::ostream& os, std::uint64_t v);
void write_f64_le(std::ostream& os, double v);
/// Throw DataError on a short read.
std::uint64_t read_u64_le(std::istream& is);
double read_f64_le(std::istream& is);

void write_magic(std::ostream& os, const std::string& magic);
/// Throws DataError unless the next bytes equal `magic`.
void expect_magic(std::istream& is, const std::string& magic);

/// Shortest round-trippable decimal text for a double.
std::string format_double(double v);

}  // namespace ubbr::io
