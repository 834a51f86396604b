#pragma once

// Experiment runner. Each subcommand reads a JSON config and/or flags,
// writes <subcommand>.csv and manifest.json into --out, and returns the
// process exit code (0 ok, 2 invalid input, 3 invariant or oracle failure).

#include <iosfwd>
#include <string>
#include <vector>

namespace semcom::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitInvariant = 3;

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace semcom::cli
