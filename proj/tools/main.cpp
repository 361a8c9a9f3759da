#include <iostream>

#include "lpal/cli.hpp"

int main(int argc, char** argv) { return lpal::parse_and_dispatch(argc, argv, std::cout, std::cerr); }
