#include <doctest.h>

TEST_SUITE_BEGIN("corruption");

TEST_SUITE_END();
