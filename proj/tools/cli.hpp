// Copyright 2026 The hotswitch Authors
// SPDX-License-Identifier: Apache-2.0

// The `hotswitch` command line: profile, fit, plan, simulate, verify and
// report subcommands over the core library.

#pragma once

#include <ostream>
#include <span>
#include <string>

namespace hotswitch::cli {

/// Runs one invocation. `args` excludes the program name. Structured output
/// goes to `out`, diagnostics to `err`. Returns the process exit code.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace hotswitch::cli
