#include "nhdp/cli.hpp"

int main(int argc, char** argv) { return nhdp::run_cli(argc, argv); }
