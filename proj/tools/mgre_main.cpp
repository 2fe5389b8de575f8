#include <iostream>

#include "mgre/experiment.hpp"

int main(int argc, char** argv) { return mgre::run_cli(argc, argv, std::cout, std::cerr); }
