#include <iostream>

#include "raf/cli.hpp"

int main(int argc, char** argv) { return raf::run_cli(argc, argv, std::cout, std::cerr); }
