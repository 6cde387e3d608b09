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

#ifndef LLPX_NUMFMT_HPP_
#define LLPX_NUMFMT_HPP_

#include <charconv>
#include <string>
#include <string_view>
#include <system_error>

#include "llpx/errors.hpp"

namespace llpx {

/// Shortest decimal form that parses back to the same double.
inline std::string fmt_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  (void)ec;
  return std::string(buf, ptr);
}

/// Strict full-token double parse.
inline double parse_double(std::string_view s) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw DataError("bad number: '" + std::string(s) + "'");
  return out;
}

inline long parse_long(std::string_view s) {
  long out = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw DataError("bad integer: '" + std::string(s) + "'");
  return out;
}

}  // namespace llpx

#endif  // LLPX_NUMFMT_HPP_
