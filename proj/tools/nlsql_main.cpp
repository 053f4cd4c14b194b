#include <iostream>

#include "nlsql/cli.hpp"

int main(int argc, char** argv) { return nlsql::run_cli(argc, argv, std::cin, std::cout, std::cerr); }
