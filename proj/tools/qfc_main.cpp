#include <iostream>

#include "qfc/cli.hpp"

int main(int argc, char** argv)
{
    return qfc::cli::run(argc, argv, std::cout, std::cerr);
}
