#include "loster/cli.hpp"

int main(int argc, char** argv) { return loster::run_cli(argc, argv); }
