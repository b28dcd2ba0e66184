#include "smoothsparse/cli.hpp"

int main(int argc, char** argv) { return smoothsparse::cli_main(argc, argv); }
