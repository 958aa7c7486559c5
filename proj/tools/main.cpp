#include "cli.hpp"

int main(int argc, char** argv) { return hoif::cli::cli_main(argc, argv); }
