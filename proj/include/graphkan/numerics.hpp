#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace graphkan {

/// Raised for invalid user input: bad shapes, malformed configs, infeasible graphs.
class input_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a numeric computation produces NaN or Inf.
class numeric_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dense row-major matrix. Nodes are rows, features are columns.
///
/// Production code uses `matrix` (doubles). The forward path is also
/// instantiated with `long double` so the finite-difference oracle can
/// evaluate losses below double rounding noise.
template <class T>
class basic_matrix {
public:
    using value_type = T;

    basic_matrix() = default;
    basic_matrix(std::size_t rows, std::size_t cols, T fill = T(0))
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    basic_matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_)
            throw input_error("matrix: data length " + std::to_string(data_.size()) +
                              " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
    }

    static basic_matrix identity(std::size_t n) {
        basic_matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1);
        return m;
    }

    /// Elementwise conversion to another scalar type.
    template <class U>
    basic_matrix<U> cast() const {
        return basic_matrix<U>(rows_, cols_, std::vector<U>(data_.begin(), data_.end()));
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    T operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const T> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<T> flat() noexcept { return data_; }
    std::span<const T> flat() const noexcept { return data_; }
    std::vector<T>& storage() noexcept { return data_; }
    const std::vector<T>& storage() const noexcept { return data_; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const noexcept {
        for (T v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    friend bool operator==(const basic_matrix&, const basic_matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

using matrix = basic_matrix<double>;

template <class T>
void require_finite(const basic_matrix<T>& m, const char* what) {
    if (!m.all_finite()) throw numeric_error(std::string(what) + ": non-finite entry");
}

/// Standard product a * b. Mixed scalar types promote.
template <class A, class B>
basic_matrix<std::common_type_t<A, B>> matmul(const basic_matrix<A>& a, const basic_matrix<B>& b) {
    using T = std::common_type_t<A, B>;
    if (a.cols() != b.rows())
        throw input_error("matmul: dimension mismatch " + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " * " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()));
    basic_matrix<T> out(a.rows(), b.cols());
    // i-k-j order keeps the inner loop contiguous in both b and out.
    for (std::size_t i = 0; i < a.rows(); ++i) {
        T* orow = out.row(i).data();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const T aik = a(i, k);
            const B* brow = b.row(k).data();
            for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
        }
    }
    require_finite(out, "matmul");
    return out;
}

/// a^T * b without materializing the transpose.
inline matrix matmul_tn(const matrix& a, const matrix& b) {
    if (a.rows() != b.rows()) throw input_error("matmul_tn: dimension mismatch");
    matrix out(a.cols(), b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const double* brow = b.row(r).data();
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double ari = a(r, i);
            double* orow = out.row(i).data();
            for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += ari * brow[j];
        }
    }
    return out;
}

/// a * b^T without materializing the transpose.
inline matrix matmul_nt(const matrix& a, const matrix& b) {
    if (a.cols() != b.cols()) throw input_error("matmul_nt: dimension mismatch");
    matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* arow = a.row(i).data();
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* brow = b.row(j).data();
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += arow[k] * brow[k];
            out(i, j) = s;
        }
    }
    return out;
}

inline matrix transpose(const matrix& a) {
    matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

/// Deterministic random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Conversions to real numbers are done here rather than through
/// <random> distributions, which are implementation-defined, so a seed yields
/// the same values on every conforming toolchain.
class rng {
public:
    explicit rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw input_error("rng::below: empty range");
        // Rejection sampling removes modulo bias.
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    /// Standard normal via Box-Muller; the second variate is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Fisher-Yates shuffle.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// Derives an independent child stream; used to give each trial or
    /// subsystem its own sequence from one base seed.
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
        // splitmix64 finalizer
        std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

struct uniform_init {
    double scale;
};
struct zeros_init {};
struct constant_init {
    double value;
};

inline matrix init_params(rng& gen, std::size_t rows, std::size_t cols, uniform_init rule) {
    if (rows == 0 || cols == 0) throw input_error("init_params: empty shape");
    matrix m(rows, cols);
    for (double& v : m.flat()) v = gen.uniform(-rule.scale, rule.scale);
    return m;
}

inline matrix init_params(rng&, std::size_t rows, std::size_t cols, zeros_init) {
    if (rows == 0 || cols == 0) throw input_error("init_params: empty shape");
    return matrix(rows, cols, 0.0);
}

inline matrix init_params(rng&, std::size_t rows, std::size_t cols, constant_init rule) {
    if (rows == 0 || cols == 0) throw input_error("init_params: empty shape");
    return matrix(rows, cols, rule.value);
}

/// Central-difference gradient of a scalar function. This is the oracle every
/// analytic backward pass is checked against.
///
/// The difference is formed in the function's own result type, so a function
/// evaluated in long double keeps its extra precision. The divisor is the
/// actual spacing of the rounded sample points.
template <class F>
std::vector<double> finite_diff_grad(F&& f, std::vector<double> x, double eps) {
    using R = std::decay_t<decltype(f(std::span<const double>(x)))>;
    if (!(eps > 0.0)) throw input_error("finite_diff_grad: eps must be positive");
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        const double xp = saved + eps;
        const double xm = saved - eps;
        x[i] = xp;
        const R fp = f(std::span<const double>(x));
        x[i] = xm;
        const R fm = f(std::span<const double>(x));
        x[i] = saved;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw numeric_error("finite_diff_grad: non-finite function value at coordinate " +
                                std::to_string(i));
        grad[i] = static_cast<double>((fp - fm) / (static_cast<R>(xp) - static_cast<R>(xm)));
    }
    return grad;
}

/// |a - b| / max(|a|, |b|, floor). The floor keeps near-zero pairs from
/// reporting huge relative errors.
inline double relative_error(double analytic, double numeric, double floor = 1e-8) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

template <class T>
T silu(T x) {
    using std::exp;
    return x / (T(1) + exp(-x));
}

inline double silu_grad(double x) {
    const double s = 1.0 / (1.0 + std::exp(-x));
    return s * (1.0 + x * (1.0 - s));
}

}  // namespace graphkan
