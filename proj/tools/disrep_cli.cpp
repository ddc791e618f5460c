#include <iostream>

#include "disrep/cli.hpp"

int main(int argc, char** argv) {
  return disrep::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
