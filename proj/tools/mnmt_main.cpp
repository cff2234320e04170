#include <iostream>
#include <string>
#include <vector>

#include "mnmt/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return mnmt::run_command(args, std::cout, std::cerr);
}
