#include "vfm/cli.hpp"

int main(int argc, char** argv) { return vfm::dispatch(argc, argv); }
