#include <iostream>
#include <string>
#include <vector>

#include "pilotwave/cli.hpp"

int main(int argc, char** argv) {
  return pilotwave::cli::main(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
