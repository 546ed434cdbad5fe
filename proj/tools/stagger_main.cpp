#include <iostream>

#include "stagger/cli.hpp"

int main(int argc, char** argv) { return stagger::run_cli(argc, argv, std::cout, std::cerr); }
