#include <iostream>
#include <string>
#include <vector>

#include "panelcausal/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return panelcausal::cli::run(args, std::cout, std::cerr);
}
