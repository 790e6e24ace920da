#include <doctest.h>

TEST_SUITE_BEGIN("seq2seq");

TEST_SUITE_END();
