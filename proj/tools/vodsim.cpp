#include <iostream>

#include "vodsim/cli.hpp"

int main(int argc, char** argv) { return vodsim::cli_main(argc, argv, std::cout, std::cerr); }
