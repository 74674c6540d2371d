#pragma once

#include <atomic>
#include <iosfwd>
#include <string>
#include <vector>

namespace rada::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Set by the SIGINT handler; augment drains in-flight slots and writes a
// partial output with an "incomplete" manifest.
std::atomic<bool>& interrupt_flag();

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rada::cli
