// Runs every acceptance criterion and prints one status line each.
// Exit status is the number of failing criteria (capped at 255).

#include "dressed/criteria.hpp"

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <string>

int main(int argc, char** argv) {
  int only = 0;
  if (argc > 1) only = std::atoi(argv[1]);
  int failures = 0;
  const auto& list = dressed::all_criteria();
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (only != 0 && static_cast<int>(i) + 1 != only) continue;
    try {
      const auto c = list[i]();
      for (const auto& ck : c.checks) {
        std::printf("    %s %s\n", ck.pass ? "ok  " : "FAIL", dressed::check_line(ck).c_str());
      }
      for (const auto& n : c.notes) std::printf("    note: %s\n", n.c_str());
      std::printf("%s\n", dressed::status_line(c).c_str());
      if (!c.pass()) ++failures;
    } catch (const std::exception& e) {
      std::printf("[FAIL] %zu error: %s\n", i + 1, e.what());
      ++failures;
    }
    std::fflush(stdout);
  }
  return failures > 255 ? 255 : failures;
}
