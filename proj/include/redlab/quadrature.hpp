#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

namespace redlab::quadrature {

namespace detail {

template <class F>
double simpson_step(F& f, double a, double fa, double b, double fb, double m, double fm, double whole,
                    double tol, int depth)
{
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::fabs(delta) <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    return simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
         + simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson with Richardson correction on [a, b].
template <class F>
double adaptive_simpson(F&& f, double a, double b, double abs_tol, int max_depth = 48)
{
    if (!(b > a)) {
        return 0.0;
    }
    const double fa = f(a);
    const double fb = f(b);
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::simpson_step(f, a, fa, b, fb, m, fm, whole, abs_tol, max_depth);
}

/// Integral over [a, b] split into geometrically shrinking pieces towards a,
/// which keeps integrable cusps at the left end (ccdf of shape < 1 laws) cheap.
template <class F>
double integrate_geometric(F&& f, double a, double b, double rel_tol, int levels = 48)
{
    if (!(b > a)) {
        return 0.0;
    }
    const double width = b - a;
    // coarse pass to size the absolute tolerance
    double coarse = 0.0;
    for (int m = 0; m < levels; ++m) {
        const double hi = a + width * std::ldexp(1.0, -m);
        const double lo = a + width * std::ldexp(1.0, -(m + 1));
        coarse += (hi - lo) / 6.0 * (f(lo) + 4.0 * f(0.5 * (lo + hi)) + f(hi));
    }
    const double scale = std::fabs(coarse) > 0.0 ? std::fabs(coarse) : 1.0;
    const double tol = rel_tol * scale / (levels + 1);

    double total = adaptive_simpson(f, a, a + width * std::ldexp(1.0, -levels), tol);
    for (int m = levels - 1; m >= 0; --m) {
        const double hi = a + width * std::ldexp(1.0, -m);
        const double lo = a + width * std::ldexp(1.0, -(m + 1));
        total += adaptive_simpson(f, lo, hi, tol);
    }
    return total;
}

/// Integral of a nonnegative, eventually decreasing integrand over [0, inf).
/// The truncation point starts at `initial_end` and doubles until the
/// integrand drops below `cutoff`.
template <class F>
double integrate_to_infinity(F&& f, double initial_end, double rel_tol = 1e-9, double cutoff = 1e-12)
{
    double end = initial_end > 0.0 ? initial_end : 1.0;
    int doublings = 0;
    while (f(end) >= cutoff) {
        end *= 2.0;
        if (++doublings > 200) {
            throw std::domain_error("integrand does not decay");
        }
    }
    return integrate_geometric(f, 0.0, end, rel_tol);
}

}  // namespace redlab::quadrature
