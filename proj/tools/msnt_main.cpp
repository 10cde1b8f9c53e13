#include "msnt/cli.hpp"

int main(int argc, char** argv) { return msnt::run_cli(argc, argv); }
