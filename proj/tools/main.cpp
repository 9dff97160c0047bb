#include <csignal>
#include <iostream>

#include "sketchfuzz/cli/cli.hpp"

extern char** environ;

namespace {

std::atomic<bool> g_interrupt{false};

void on_signal(int) { g_interrupt = true; }

} // namespace

int main(int argc, char** argv) {
  // First signal: finish the current statement, flush, write reports.
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::vector<std::string> args(argv, argv + argc);
  std::vector<std::string> env;
  for (char** e = environ; *e; ++e)
    env.emplace_back(*e);
  return sketchfuzz::run_cli(args, env, std::cout, std::cerr, &g_interrupt);
}
