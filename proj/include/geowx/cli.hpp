// include/geowx/cli.hpp

// Copyright 2026 The geowx authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GEOWX_CLI_HPP_
#define GEOWX_CLI_HPP_

#include <string>
#include <vector>

namespace geowx::cli {

// Runs one tool invocation. Exit codes: 0 success, 1 bad arguments or
// input validation failure, 2 runtime failure. Exposed as a function so
// tests can drive the tool in process.
int dispatch(int argc, const char* const* argv);

// Convenience overload; args exclude the program name.
int dispatch(const std::vector<std::string>& args);

}  // namespace geowx::cli

#endif  // GEOWX_CLI_HPP_
