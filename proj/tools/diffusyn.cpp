#include <iostream>

#include "diffusyn/cli.hpp"

int main(int argc, char** argv) { return diffusyn::run_cli(argc, argv, std::cout, std::cerr); }
