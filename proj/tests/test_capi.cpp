#include <doctest.h>

TEST_SUITE_BEGIN("capi");

TEST_SUITE_END();
