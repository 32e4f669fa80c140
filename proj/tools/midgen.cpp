#include "midgen/cli.hpp"

int main(int argc, char** argv) { return midgen::run_cli(argc, argv); }
