#define CATCH_CONFIG_MAIN  // not used by amalgamated; main comes from the translation unit
#include <catch2/catch_amalgamated.cpp>
