#include <noisesync/cli.hpp>

int main(int argc, char** argv) { return noisesync::cli::run(argc, argv); }
