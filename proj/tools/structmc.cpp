#include "structmc/cli.hpp"

int main(int argc, char** argv) { return structmc::cli_main(argc, argv); }
