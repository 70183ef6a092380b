#include "edlab/cli.hpp"

int main(int argc, char** argv) { return edlab::cli::run(argc, argv); }
