#include "spicymkl/cli.hpp"

int main(int argc, char** argv) { return mkl::run_cli(argc, argv); }
