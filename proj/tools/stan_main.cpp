#include <malloc.h>

#include <iostream>

#include "stan/cli.hpp"

int main(int argc, char** argv) {
  // Keep large activation buffers in the heap between batches instead of
  // returning them to the kernel and faulting them back in.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  return stan::cli::run_cli(argc, argv, std::cout, std::cerr);
}
