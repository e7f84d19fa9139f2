#pragma once

// Distribution functions used for every p-value and sample-size computation.
// Incomplete beta and gamma use the modified Lentz continued fraction; the
// normal quantile is Wichura's AS241 (PPND16), relative error about 1e-16.

#include <cmath>
#include <limits>
#include <stdexcept>

namespace factorial::special {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -std::numeric_limits<double>::infinity();
        if (p == 1.0) return std::numeric_limits<double>::infinity();
        throw std::domain_error("normal_quantile: p outside [0, 1]");
    }
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num =
            ((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e+0;
        const double den =
            ((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0;
        return q * num / den;
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        const double num =
            ((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                 2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
               3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
             4.63033784615654529590e+0) * r + 1.42343711074968357734e+0;
        const double den =
            ((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
               6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
             2.05319162663775882187e+0) * r + 1.0;
        val = num / den;
    } else {
        r -= 5.0;
        const double num =
            ((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
               2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
             5.46378491116411436990e+0) * r + 6.65790464350110377720e+0;
        const double den =
            ((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
               1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
             5.99832206555887937690e-1) * r + 1.0;
        val = num / den;
    }
    return q < 0.0 ? -val : val;
}

namespace detail {

inline constexpr double kTiny = 1e-300;
inline constexpr double kEps = 1e-16;
inline constexpr int kMaxIter = 100000;

// Continued fraction for I_x(a, b), valid for x < (a + 1) / (a + b + 2).
// y = 1 - x is passed to avoid cancelling in the first denominator.
inline double beta_cf(double a, double b, double x, double y) {
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = (1.0 - b + qab * y) / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return h;
    }
    throw std::runtime_error("incomplete beta: continued fraction did not converge");
}

}  // namespace detail

namespace detail {

// lgamma(z) - ((z - 1/2) ln z - z + ln(2 pi) / 2), valid for z >= 15.
inline double stirling_tail(double z) {
    const double z2 = 1.0 / (z * z);
    return (1.0 / 12.0 - z2 * (1.0 / 360.0 - z2 * (1.0 / 1260.0 - z2 * (1.0 / 1680.0 - z2 / 1188.0)))) / z;
}

// log(x^a y^b / B(a, b)) with y = 1 - x supplied separately. Large
// parameters use Stirling-form differences so that no two terms of size
// lgamma(a) have to cancel.
inline double log_beta_front(double a, double b, double x, double y) {
    constexpr double big = 15.0;
    const double lx = x < 0.5 ? std::log(x) : std::log1p(-y);
    const double ly = y < 0.5 ? std::log(y) : std::log1p(-x);
    if (a < big && b < big) return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * lx + b * ly;
    if (a >= big && b >= big) {
        const double d = x * b - y * a;  // x (a + b) - a
        return a * std::log1p(d / a) + b * std::log1p(-d / b) + 0.5 * std::log(a * b / (a + b)) -
               0.5 * std::log(2.0 * 3.14159265358979323846) - stirling_tail(a) - stirling_tail(b) +
               stirling_tail(a + b);
    }
    const double hi = std::max(a, b);
    const double lo = std::min(a, b);
    const double log_beta = std::lgamma(lo) - lo * std::log(hi) - (hi + lo - 0.5) * std::log1p(lo / hi) + lo +
                            stirling_tail(hi) - stirling_tail(hi + lo);
    return a * lx + b * ly - log_beta;
}

inline double incomplete_beta(double a, double b, double x, double y) {
    if (!(a > 0.0 && b > 0.0)) throw std::domain_error("incomplete_beta: a, b must be > 0");
    if (x <= 0.0) return 0.0;
    if (y <= 0.0) return 1.0;
    const double front = std::exp(log_beta_front(a, b, x, y));
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x, y) / a;
    return 1.0 - front * beta_cf(b, a, y, x) / b;
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
    if (x >= 1.0) return detail::incomplete_beta(a, b, 1.0, 0.0);
    return detail::incomplete_beta(a, b, x, 1.0 - x);
}

// Regularized lower incomplete gamma P(a, x).
inline double gamma_p(double a, double x);

// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
inline double gamma_q(double a, double x) {
    if (!(a > 0.0)) throw std::domain_error("gamma_q: a must be > 0");
    if (x <= 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p(a, x);
    const double log_front = -x + a * std::log(x) - std::lgamma(a);
    double b = x + 1.0 - a;
    double c = 1.0 / detail::kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= detail::kMaxIter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < detail::kTiny) d = detail::kTiny;
        c = b + an / c;
        if (std::abs(c) < detail::kTiny) c = detail::kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < detail::kEps) return std::exp(log_front) * h;
    }
    throw std::runtime_error("incomplete gamma: continued fraction did not converge");
}

inline double gamma_p(double a, double x) {
    if (!(a > 0.0)) throw std::domain_error("gamma_p: a must be > 0");
    if (x <= 0.0) return 0.0;
    if (x >= a + 1.0) return 1.0 - gamma_q(a, x);
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 1; n <= detail::kMaxIter; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * detail::kEps) {
            return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
        }
    }
    throw std::runtime_error("incomplete gamma: series did not converge");
}

// Two-sided p-value P(|T| >= |t|) for Student's t with `dof` degrees of freedom.
inline double t_two_sided_p(double t, double dof) {
    if (!std::isfinite(t)) return 0.0;
    const double t2 = t * t;
    return detail::incomplete_beta(0.5 * dof, 0.5, dof / (dof + t2), t2 / (dof + t2));
}

inline double t_cdf(double t, double dof) {
    const double tail = 0.5 * t_two_sided_p(t, dof);
    return t >= 0.0 ? 1.0 - tail : tail;
}

// Upper tail P(F >= f) of the F(d1, d2) distribution.
inline double f_sf(double f, double d1, double d2) {
    if (f <= 0.0) return 1.0;
    const double s = d2 + d1 * f;
    return detail::incomplete_beta(0.5 * d2, 0.5 * d1, d2 / s, d1 * f / s);
}

// Upper tail P(X >= x) of chi-square with k degrees of freedom.
inline double chi2_sf(double x, double k) {
    if (x <= 0.0) return 1.0;
    return gamma_q(0.5 * k, 0.5 * x);
}

}  // namespace factorial::special
