#include <doctest.h>

TEST_SUITE_BEGIN("optim");

TEST_SUITE_END();
