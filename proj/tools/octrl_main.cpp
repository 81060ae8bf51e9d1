#include "octrl/cli.hpp"

int main(int argc, char** argv) { return octrl::run_cli(argc, argv); }
