#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include "vgp/text.hpp"

int main(int argc, char** argv) {
  vgp::set_warnings_enabled(false);
  doctest::Context ctx(argc, argv);
  return ctx.run();
}
