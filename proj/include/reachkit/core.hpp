#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <functional>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace reachkit {

inline constexpr const char* version = "0.1.0";

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;
using RVec = std::vector<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr cplx I{0.0, 1.0};

// Every failure carries the pipeline stage that raised it; the CLI maps it to an exit code.
class Error : public std::runtime_error {
public:
    Error(std::string stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct ComplexPoint {
    RVec real_part;
    RVec imag_part;

    ComplexPoint() = default;
    ComplexPoint(RVec re, RVec im) : real_part(std::move(re)), imag_part(std::move(im)) {
        if (real_part.size() != imag_part.size())
            throw Error("geometry", "real and imaginary parts differ in dimension");
    }
    explicit ComplexPoint(const CVec& z) {
        for (auto v : z) {
            real_part.push_back(v.real());
            imag_part.push_back(v.imag());
        }
    }
    static ComplexPoint scalar(cplx z) { return ComplexPoint(RVec{z.real()}, RVec{z.imag()}); }

    std::size_t dim() const { return real_part.size(); }
    CVec as_complex() const {
        CVec z(dim());
        for (std::size_t j = 0; j < dim(); ++j) z[j] = {real_part[j], imag_part[j]};
        return z;
    }
};

inline double norm2(const RVec& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline cplx csquare(const cplx* z, std::size_t d) {
    cplx s = 0;
    for (std::size_t j = 0; j < d; ++j) s += z[j] * z[j];
    return s;
}

struct GaussRule {
    RVec x, w;
};

// Golub-Welsch on the Legendre Jacobi matrix, cached per order.
inline const GaussRule& gauss_legendre(int n) {
    static std::mutex mtx;
    static std::map<int, GaussRule> cache;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        double b = k / std::sqrt(4.0 * k * k - 1.0);
        J(k, k - 1) = J(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    GaussRule r;
    r.x.resize(n);
    r.w.resize(n);
    for (int k = 0; k < n; ++k) {
        r.x[k] = es.eigenvalues()(k);
        double v = es.eigenvectors()(0, k);
        r.w[k] = 2.0 * v * v;
    }
    // symmetrize to kill eigen-solver asymmetry at the 1e-16 level
    for (int k = 0; k < n / 2; ++k) {
        double xm = 0.5 * (r.x[n - 1 - k] - r.x[k]);
        double wm = 0.5 * (r.w[n - 1 - k] + r.w[k]);
        r.x[k] = -xm;
        r.x[n - 1 - k] = xm;
        r.w[k] = r.w[n - 1 - k] = wm;
    }
    if (n % 2 == 1) r.x[n / 2] = 0.0;
    return cache.emplace(n, std::move(r)).first->second;
}

// Nodes and weights of a composite rule over consecutive breakpoints.
inline void composite_nodes(const RVec& breaks, int order, RVec& x, RVec& w) {
    const GaussRule& g = gauss_legendre(order);
    x.clear();
    w.clear();
    for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
        double a = breaks[p], b = breaks[p + 1];
        if (!(b > a)) continue;
        double h = 0.5 * (b - a), c = 0.5 * (a + b);
        for (int k = 0; k < order; ++k) {
            x.push_back(c + h * g.x[k]);
            w.push_back(h * g.w[k]);
        }
    }
}

inline RVec uniform_breaks(double a, double b, int panels) {
    RVec br(panels + 1);
    for (int p = 0; p <= panels; ++p) br[p] = a + (b - a) * p / panels;
    br[panels] = b;
    return br;
}

// Breakpoints clustered quadratically toward `a` (the end where the integrand peaks).
inline RVec graded_breaks(double a, double b, int panels) {
    RVec br(panels + 1);
    for (int p = 0; p <= panels; ++p) {
        double s = double(p) / panels;
        br[p] = a + (b - a) * s * s;
    }
    br[panels] = b;
    return br;
}

inline RVec merge_breaks(RVec br, const RVec& extra) {
    double lo = br.front(), hi = br.back();
    for (double e : extra)
        if (e > lo && e < hi) br.push_back(e);
    std::sort(br.begin(), br.end());
    RVec out;
    for (double v : br)
        if (out.empty() || v - out.back() > 1e-14 * (1.0 + std::abs(v))) out.push_back(v);
    out.back() = hi;
    return out;
}

// Counter-based generator: the k-th draw depends only on (seed, k).
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t bits(std::uint64_t counter) const {
        std::uint64_t z = seed_ * 0x9E3779B97F4A7C15ull + counter * 0xD1B54A32D192ED03ull + 0x632BE59BD9B4E019ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
    double uniform(std::uint64_t counter) const { return (bits(counter) >> 11) * 0x1.0p-53; }
    double uniform(std::uint64_t counter, double a, double b) const { return a + (b - a) * uniform(counter); }

    // Stateful convenience wrapper.
    double next() { return uniform(count_++); }
    double next(double a, double b) { return uniform(count_++, a, b); }
    double normal() {
        double u1 = std::max(next(), 1e-300), u2 = next();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * pi * u2);
    }

private:
    std::uint64_t seed_;
    std::uint64_t count_ = 0;
};

inline int thread_count() {
    static int n = [] {
        int hw = std::max(1u, std::thread::hardware_concurrency());
        if (const char* env = std::getenv("REACHKIT_THREADS")) {
            int v = std::atoi(env);
            if (v >= 1) return std::min(v, hw);
        }
        return hw;
    }();
    return n;
}

// Static contiguous partition, so every index is processed by a fixed worker and results are
// independent of scheduling.
template <class F>
void parallel_for(std::size_t n, F&& fn) {
    std::size_t nt = std::min<std::size_t>(thread_count(), n);
    if (nt <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr err;
    std::mutex em;
    for (std::size_t k = 0; k < nt; ++k) {
        pool.emplace_back([&, k] {
            std::size_t lo = n * k / nt, hi = n * (k + 1) / nt;
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> g(em);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace reachkit
