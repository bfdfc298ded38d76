#include <bihlab/cli.hpp>

int main(int argc, char** argv) { return bihlab::cli_main(argc, argv); }
