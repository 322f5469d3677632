#include "efnlm/cli.hpp"

int main(int argc, char** argv) { return efnlm::parse_and_dispatch(argc, argv); }
