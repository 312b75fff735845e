#include "cli.hpp"

int main(int argc, char** argv) { return gridppo::cli_main(argc, argv); }
