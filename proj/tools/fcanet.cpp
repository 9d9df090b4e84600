#include <iostream>

#include "fcanet/cli/commands.hpp"

int main(int argc, char** argv) {
  return fcanet::cli::run({argv + 1, argv + argc}, std::cout, std::cerr);
}
