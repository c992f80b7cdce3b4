#pragma once

// Tiny check/run harness shared by the test binaries. Each test file is a
// standalone executable: RUN(fn) prints the test name, CHECK* macros record
// failures, and summary() is the process exit code.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

namespace testing {

inline int failures = 0;
inline int checks = 0;

inline void fail(const char* what, const char* file, int line, const std::string& detail) {
    ++failures;
    std::fprintf(stderr, "    FAIL %s:%d  %s%s%s\n", file, line, what,
                 detail.empty() ? "" : "  -- ", detail.c_str());
}

inline bool near(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

inline bool rel_near(double a, double b, double rtol) {
    const double scale = std::max(std::fabs(a), std::fabs(b));
    return std::fabs(a - b) <= rtol * std::max(scale, 1e-300);
}

inline int summary() {
    std::printf("%d checks, %d failures\n", checks, failures);
    return failures == 0 ? 0 : 1;
}

} // namespace testing

#define CHECK(cond)                                                      \
    do {                                                                 \
        ++testing::checks;                                               \
        if (!(cond)) testing::fail(#cond, __FILE__, __LINE__, "");       \
    } while (0)

#define CHECK_MSG(cond, msg)                                             \
    do {                                                                 \
        ++testing::checks;                                               \
        if (!(cond)) testing::fail(#cond, __FILE__, __LINE__, (msg));    \
    } while (0)

#define CHECK_NEAR(a, b, tol)                                                              \
    do {                                                                                   \
        ++testing::checks;                                                                 \
        const double va_ = double(a), vb_ = double(b);                                     \
        if (!testing::near(va_, vb_, (tol)))                                               \
            testing::fail(#a " ~= " #b, __FILE__, __LINE__,                                \
                          std::to_string(va_) + " vs " + std::to_string(vb_));             \
    } while (0)

#define CHECK_REL(a, b, rtol)                                                              \
    do {                                                                                   \
        ++testing::checks;                                                                 \
        const double va_ = double(a), vb_ = double(b);                                     \
        if (!testing::rel_near(va_, vb_, (rtol)))                                          \
            testing::fail(#a " ~r~ " #b, __FILE__, __LINE__,                               \
                          std::to_string(va_) + " vs " + std::to_string(vb_));             \
    } while (0)

#define CHECK_THROWS(expr)                                                        \
    do {                                                                          \
        ++testing::checks;                                                        \
        bool threw_ = false;                                                      \
        try {                                                                     \
            (void)(expr);                                                         \
        } catch (...) {                                                           \
            threw_ = true;                                                        \
        }                                                                         \
        if (!threw_) testing::fail("expected throw: " #expr, __FILE__, __LINE__, ""); \
    } while (0)

#define RUN(fn)                         \
    do {                                \
        std::printf("[ RUN ] %s\n", #fn); \
        fn();                           \
    } while (0)
