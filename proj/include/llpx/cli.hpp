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

#ifndef LLPX_CLI_HPP_
#define LLPX_CLI_HPP_

namespace llpx::cli {

// Subcommands: gen, bag, train, predict, cv, sweep, bench.
// Exit codes: 0 ok, 1 usage error, 2 data error, 3 numerical failure.
// Diagnostics go to stderr; machine-readable output goes to files only,
// written atomically. LLPX_SEED overrides the default seed when no
// --seed flag or config value is given.
int run(int argc, const char* const* argv);

}  // namespace llpx::cli

#endif  // LLPX_CLI_HPP_
