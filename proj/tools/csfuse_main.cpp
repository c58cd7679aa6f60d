#include <iostream>
#include <string>
#include <vector>

#include "csfuse/app/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return csfuse::app::run_command(args, std::cout, std::cerr);
}
