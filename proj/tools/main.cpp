#include <iostream>

#include "pearrl/cli.hpp"

int main(int argc, char** argv) { return pearrl::cli::dispatch(argc, argv, std::cout, std::cerr); }
