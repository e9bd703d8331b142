#include "convsv/cli/cli.hpp"

int main(int argc, char** argv) { return convsv::cli::main(argc, argv); }
