#pragma once

#include <gtest/gtest.h>

#include "meanfield/error.hpp"

// Asserts that `expr` throws meanfield::Error with the given code.
#define EXPECT_MF_ERROR(expr, error_code)                                              \
  do {                                                                                 \
    try {                                                                              \
      (void)(expr);                                                                    \
      ADD_FAILURE() << "expected " << meanfield::to_string(error_code) << " from " #expr; \
    } catch (const meanfield::Error& e) {                                              \
      EXPECT_EQ(e.code(), error_code) << e.what();                                     \
    }                                                                                  \
  } while (false)
