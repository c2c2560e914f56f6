#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace slapseg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line (args[0] is the program name). Output and errors go
/// to the given streams.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Every option of every subcommand as "subcommand --name"; options without a
/// description are listed under `undocumented`.
struct HelpAudit {
  std::vector<std::string> options;
  std::vector<std::string> undocumented;
};
HelpAudit audit_help();

}  // namespace slapseg::cli
