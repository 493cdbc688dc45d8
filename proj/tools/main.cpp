#include <iostream>
#include <string>
#include <vector>

#include "topicreg/cli.hpp"

int main(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return topicreg::cli::main_entry(args, std::cout, std::cerr);
}
