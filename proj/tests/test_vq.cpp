#include <doctest.h>

TEST_SUITE_BEGIN("vq");

TEST_SUITE_END();
