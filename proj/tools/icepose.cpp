#include <string>
#include <vector>

#include "icepose/cli.hpp"

int main(int argc, char** argv) {
  return icepose::cli_dispatch(std::vector<std::string>(argv + 1, argv + argc));
}
