#include <iostream>

#include "icct/app.hpp"

int main(int argc, char** argv) { return icct::app::run(argc, argv, std::cout, std::cerr); }
