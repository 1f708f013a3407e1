#include "ltlfuzz/cli.hpp"

int main(int argc, char** argv) { return ltlfuzz::run_cli(argc, argv); }
