#include "runner/commands.hpp"

int main(int argc, char** argv) { return parabolica::runner::run_cli(argc, argv); }
