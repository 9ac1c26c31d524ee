#include "envlab/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return envlab::run_cli(argc, argv, std::cout, std::cerr); }
