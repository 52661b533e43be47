#include "commands.hpp"

int main(int argc, char** argv) { return uavipp::cli::run(argc, argv); }
