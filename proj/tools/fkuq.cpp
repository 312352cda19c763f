#include "fkuq/cli.hpp"

int main(int argc, char** argv)
{
  return fkuq::cli::run(argc, argv);
}
