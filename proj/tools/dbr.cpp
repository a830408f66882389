#include <iostream>

#include "dbr/cli/app.hpp"

int main(int argc, char** argv) { return dbr::cli::run_cli(argc, argv, std::cout, std::cerr); }
