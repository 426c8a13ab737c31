#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "numerics.hpp"

namespace graphkan {

/// Largest supported spline degree. Local basis buffers are sized from it.
inline constexpr int max_spline_degree = 7;

/// Uniform knot vector on [lo, hi] with `intervals` cells, extended by
/// `degree` cells on each side so that all `intervals + degree` basis
/// functions are complete on the domain.
struct spline_grid {
    int degree = 3;
    int intervals = 5;
    double lo = -2.0;
    double hi = 2.0;
    std::vector<double> knots;

    spline_grid() : spline_grid(3, 5, -2.0, 2.0) {}

    spline_grid(int degree_, int intervals_, double lo_, double hi_)
        : degree(degree_), intervals(intervals_), lo(lo_), hi(hi_) {
        if (degree < 0 || degree > max_spline_degree)
            throw input_error("spline_grid: degree must be in [0, " +
                              std::to_string(max_spline_degree) + "]");
        if (intervals < 1) throw input_error("spline_grid: need at least one interval");
        if (!(lo < hi)) throw input_error("spline_grid: domain must satisfy lo < hi");
        const double h = step();
        knots.resize(static_cast<std::size_t>(intervals + 2 * degree + 1));
        for (std::size_t j = 0; j < knots.size(); ++j)
            knots[j] = lo + (static_cast<double>(j) - degree) * h;
        // Pin the domain endpoints exactly.
        knots[static_cast<std::size_t>(degree)] = lo;
        knots[static_cast<std::size_t>(degree + intervals)] = hi;
    }

    double step() const noexcept { return (hi - lo) / intervals; }
    std::size_t num_basis() const noexcept { return static_cast<std::size_t>(intervals + degree); }
    template <class T>
    T clamp(T x) const noexcept {
        return std::clamp(x, static_cast<T>(lo), static_cast<T>(hi));
    }

    friend bool operator==(const spline_grid& a, const spline_grid& b) {
        return a.degree == b.degree && a.intervals == b.intervals && a.lo == b.lo && a.hi == b.hi;
    }
};

/// The `degree + 1` basis functions that can be nonzero at one point.
/// Entry r belongs to global basis index `first + r`.
template <class T = double>
struct local_basis {
    std::size_t first = 0;
    std::array<T, max_spline_degree + 1> values{};
};

namespace detail {

/// Knot span s with knots[s] <= x < knots[s+1], restricted to the domain cells.
/// x == hi maps to the last cell so the right endpoint is evaluated from inside.
template <class T>
std::size_t find_span(const spline_grid& g, T x) {
    const auto first = static_cast<std::size_t>(g.degree);
    const auto last = static_cast<std::size_t>(g.degree + g.intervals - 1);
    if (x >= g.hi) return last;
    if (x <= g.lo) return first;
    auto s = first + static_cast<std::size_t>(static_cast<double>((x - g.lo) / g.step()));
    s = std::clamp(s, first, last);
    // Rounding in the division can land one cell off.
    while (s > first && x < g.knots[s]) --s;
    while (s < last && x >= g.knots[s + 1]) ++s;
    return s;
}

/// Nonzero basis values of degree p on span s (triangular Cox-de Boor).
/// Writes p+1 values into out.
template <class T>
void nonzero_basis(const std::vector<double>& t, std::size_t s, int p, T x, T* out) {
    std::array<T, max_spline_degree + 1> left{}, right{};
    out[0] = T(1);
    for (int j = 1; j <= p; ++j) {
        left[static_cast<std::size_t>(j)] = x - t[s + 1 - static_cast<std::size_t>(j)];
        right[static_cast<std::size_t>(j)] = t[s + static_cast<std::size_t>(j)] - x;
        T saved = T(0);
        for (int r = 0; r < j; ++r) {
            const T denom = right[static_cast<std::size_t>(r + 1)] +
                                 left[static_cast<std::size_t>(j - r)];
            const T temp = out[r] / denom;
            out[r] = saved + right[static_cast<std::size_t>(r + 1)] * temp;
            saved = left[static_cast<std::size_t>(j - r)] * temp;
        }
        out[j] = saved;
    }
}

}  // namespace detail

/// Nonzero basis values at clamp(x).
template <class T = double>
local_basis<T> basis_local(const spline_grid& g, T x) {
    const T xc = g.clamp(x);
    const std::size_t s = detail::find_span(g, xc);
    local_basis<T> out;
    out.first = s - static_cast<std::size_t>(g.degree);
    detail::nonzero_basis(g.knots, s, g.degree, xc, out.values.data());
    return out;
}

/// Derivatives of the nonzero basis functions at clamp(x), indexed like
/// basis_local. On the domain boundary this is the one-sided derivative
/// taken from inside the domain.
inline local_basis<double> basis_deriv_local(const spline_grid& g, double x) {
    const double xc = g.clamp(x);
    const std::size_t s = detail::find_span(g, xc);
    const int k = g.degree;
    local_basis<double> out;
    out.first = s - static_cast<std::size_t>(k);
    if (k == 0) return out;
    // B'_{i,k} = k/(t_{i+k}-t_i) B_{i,k-1} - k/(t_{i+k+1}-t_{i+1}) B_{i+1,k-1}.
    // The nonzero degree-(k-1) bases on span s are B_{s-k+1..s}.
    std::array<double, max_spline_degree + 1> lower{};
    detail::nonzero_basis(g.knots, s, k - 1, xc, lower.data());
    const auto& t = g.knots;
    for (int r = 0; r <= k; ++r) {
        const std::size_t i = out.first + static_cast<std::size_t>(r);
        // B_{i,k-1} is lower[r-1] when r >= 1; B_{i+1,k-1} is lower[r] when r <= k-1.
        double d = 0.0;
        if (r >= 1) d += k / (t[i + static_cast<std::size_t>(k)] - t[i]) * lower[static_cast<std::size_t>(r - 1)];
        if (r <= k - 1)
            d -= k / (t[i + static_cast<std::size_t>(k) + 1] - t[i + 1]) * lower[static_cast<std::size_t>(r)];
        out.values[static_cast<std::size_t>(r)] = d;
    }
    return out;
}

/// All `num_basis()` basis values at x; x outside [lo, hi] is clamped.
inline std::vector<double> basis(const spline_grid& g, double x) {
    std::vector<double> out(g.num_basis(), 0.0);
    const local_basis<double> lb = basis_local(g, x);
    for (int r = 0; r <= g.degree; ++r) out[lb.first + static_cast<std::size_t>(r)] = lb.values[static_cast<std::size_t>(r)];
    return out;
}

/// All `num_basis()` basis derivatives at x; see basis_deriv_local.
inline std::vector<double> basis_deriv(const spline_grid& g, double x) {
    std::vector<double> out(g.num_basis(), 0.0);
    const local_basis<double> lb = basis_deriv_local(g, x);
    if (g.degree == 0) return out;
    for (int r = 0; r <= g.degree; ++r) out[lb.first + static_cast<std::size_t>(r)] = lb.values[static_cast<std::size_t>(r)];
    return out;
}

}  // namespace graphkan
