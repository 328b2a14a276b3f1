#include <verbatim/cli.hpp>

int main(int argc, char** argv) { return verbatim::cli::run(argc, argv); }
