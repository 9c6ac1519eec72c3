#include "qtag/cli.hpp"

int main(int argc, char** argv) { return qtag::cli_main(argc, argv); }
