#include <string>
#include <vector>

#include "xlmap/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return xlmap::cli::run_cli(args);
}
