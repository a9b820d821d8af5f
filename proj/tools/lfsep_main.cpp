#include "lfsep/cli.hpp"

int main(int argc, char** argv) { return lfsep::run_command(argc, argv); }
