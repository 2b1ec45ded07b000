#include "n2n/cli.hpp"

int main(int argc, char** argv) { return n2n::run_cli(argc, argv); }
