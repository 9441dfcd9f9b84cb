#include <iostream>

#include "figp/cli.hpp"

int main(int argc, char** argv) { return figp::run_cli(argc, argv, std::cout, std::cerr); }
