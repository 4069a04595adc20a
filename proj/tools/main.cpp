#include "terrasurf/cli.hpp"

int main(int argc, char** argv) { return terrasurf::run_cli(argc, argv); }
