#include "fsh/cli.hpp"

int main(int argc, char** argv) { return fsh::cli::run(argc, argv); }
