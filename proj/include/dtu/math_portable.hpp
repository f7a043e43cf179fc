#pragma once

namespace dtu {

// sin/cos/log with fixed coefficients and evaluation order, so results are
// identical on every IEEE-754 platform (libm implementations differ by ULPs).
// Valid for |x| < 1e6, accuracy ~1e-13 relative. Compiled with fp-contract
// off; do not let these calls go through FMA-contracted paths.
double psin(double x);
double pcos(double x);
double plog(double x);

}  // namespace dtu
