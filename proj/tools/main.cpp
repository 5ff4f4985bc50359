#include <iostream>

#include "easter/cli.hpp"

int main(int argc, char** argv) { return easter::run_cli(argc, argv, std::cout, std::cerr); }
