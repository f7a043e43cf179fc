#include "dtu/math_portable.hpp"

#include <cmath>
#include <cstdint>
#include <limits>

namespace dtu {

namespace {

// fdlibm-style kernel coefficients (minimax on [-pi/4, pi/4]).
constexpr double kS1 = -1.66666666666666324348e-01;
constexpr double kS2 = 8.33333333332248946124e-03;
constexpr double kS3 = -1.98412698298579493134e-04;
constexpr double kS4 = 2.75573137070700676789e-06;
constexpr double kS5 = -2.50507602534068634195e-08;
constexpr double kS6 = 1.58969099521155010221e-10;

constexpr double kC1 = 4.16666666666666019037e-02;
constexpr double kC2 = -1.38888888888741095749e-03;
constexpr double kC3 = 2.48015872894767294178e-05;
constexpr double kC4 = -2.75573143513906633035e-07;
constexpr double kC5 = 2.08757232129817482790e-09;
constexpr double kC6 = -1.13596475577881948265e-11;

constexpr double kInvPio2 = 6.36619772367581382433e-01;  // 2/pi
constexpr double kPio2Hi = 1.57079632679489655800e+00;
constexpr double kPio2Lo = 6.12323399573676603587e-17;

double kernel_sin(double r) {
  const double z = r * r;
  return r + r * z * (kS1 + z * (kS2 + z * (kS3 + z * (kS4 + z * (kS5 + z * kS6)))));
}

double kernel_cos(double r) {
  const double z = r * r;
  return 1.0 - 0.5 * z +
         z * z * (kC1 + z * (kC2 + z * (kC3 + z * (kC4 + z * (kC5 + z * kC6)))));
}

// Cody-Waite reduction to [-pi/4, pi/4]; quadrant in [0, 3].
double reduce(double x, int& quadrant) {
  const double k = std::floor(x * kInvPio2 + 0.5);
  const auto n = static_cast<std::int64_t>(k);
  const double r = (x - k * kPio2Hi) - k * kPio2Lo;
  quadrant = static_cast<int>(n & 3);
  return r;
}

}  // namespace

double psin(double x) {
  if (!std::isfinite(x)) return std::numeric_limits<double>::quiet_NaN();
  int q = 0;
  const double r = reduce(x, q);
  switch (q) {
    case 0: return kernel_sin(r);
    case 1: return kernel_cos(r);
    case 2: return -kernel_sin(r);
    default: return -kernel_cos(r);
  }
}

double pcos(double x) {
  if (!std::isfinite(x)) return std::numeric_limits<double>::quiet_NaN();
  int q = 0;
  const double r = reduce(x, q);
  switch (q) {
    case 0: return kernel_cos(r);
    case 1: return -kernel_sin(r);
    case 2: return -kernel_cos(r);
    default: return kernel_sin(r);
  }
}

double plog(double x) {
  if (x < 0.0 || !std::isfinite(x)) return std::numeric_limits<double>::quiet_NaN();
  if (x == 0.0) return -std::numeric_limits<double>::infinity();

  int e = 0;
  double f = std::frexp(x, &e);  // f in [0.5, 1)
  constexpr double kSqrtHalf = 0.70710678118654752440;
  if (f < kSqrtHalf) {
    f *= 2.0;
    e -= 1;
  }
  // log(f) = 2 atanh(s), s = (f-1)/(f+1), |s| <= 3-2*sqrt(2)
  const double s = (f - 1.0) / (f + 1.0);
  const double z = s * s;
  const double p =
      1.0 + z * (1.0 / 3.0 +
                 z * (1.0 / 5.0 +
                      z * (1.0 / 7.0 + z * (1.0 / 9.0 + z * (1.0 / 11.0 + z * (1.0 / 13.0))))));
  const double logf = 2.0 * s * p;
  constexpr double kLn2Hi = 6.93147180369123816490e-01;
  constexpr double kLn2Lo = 1.90821492927058770002e-10;
  const double de = static_cast<double>(e);
  return de * kLn2Hi + (logf + de * kLn2Lo);
}

}  // namespace dtu
