#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

namespace sollu {

using cplx = std::complex<double>;

inline constexpr bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline constexpr std::size_t next_pow2(std::size_t n)
{
    std::size_t p = 1;
    while (p < n)
        p <<= 1;
    return p;
}

namespace detail {

// FFTW planning is not thread-safe; execution on distinct arrays is.
inline std::mutex& fftw_planner_mutex()
{
    static std::mutex m;
    return m;
}

struct PlanDeleter {
    void operator()(fftw_plan_s* p) const
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(p);
    }
};

using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

} // namespace detail

// Real-input transform of a fixed length n; n / 2 + 1 output bins.
// FFTW_ESTIMATE keeps the chosen algorithm, and so the rounding, identical
// across runs.
class RealFft {
public:
    explicit RealFft(std::size_t n) : n_(n)
    {
        if (n == 0)
            throw std::invalid_argument("transform size must be positive");
        std::vector<double> in(n);
        std::vector<cplx> out(bins());
        std::lock_guard lock(detail::fftw_planner_mutex());
        forward_.reset(fftw_plan_dft_r2c_1d(int(n), in.data(),
                                            reinterpret_cast<fftw_complex*>(out.data()),
                                            FFTW_ESTIMATE | FFTW_UNALIGNED));
        inverse_.reset(fftw_plan_dft_c2r_1d(int(n), reinterpret_cast<fftw_complex*>(out.data()),
                                            in.data(), FFTW_ESTIMATE | FFTW_UNALIGNED));
        if (!forward_ || !inverse_)
            throw std::runtime_error("FFTW planning failed");
    }

    std::size_t size() const { return n_; }
    std::size_t bins() const { return n_ / 2 + 1; }

    void forward(std::span<const double> in, std::span<cplx> out) const
    {
        if (in.size() != n_ || out.size() != bins())
            throw std::invalid_argument("transform length mismatch");
        fftw_execute_dft_r2c(forward_.get(), const_cast<double*>(in.data()),
                             reinterpret_cast<fftw_complex*>(out.data()));
    }

    std::vector<cplx> forward(std::span<const double> in) const
    {
        std::vector<cplx> out(bins());
        forward(in, out);
        return out;
    }

    // Unnormalized; divide by size() to invert forward(). Overwrites `in`.
    void inverse(std::span<cplx> in, std::span<double> out) const
    {
        if (in.size() != bins() || out.size() != n_)
            throw std::invalid_argument("transform length mismatch");
        fftw_execute_dft_c2r(inverse_.get(), reinterpret_cast<fftw_complex*>(in.data()),
                             out.data());
    }

private:
    std::size_t n_;
    detail::Plan forward_, inverse_;
};

// Full-length DFT of a real sequence.
class Dft {
public:
    explicit Dft(std::size_t n) : fft_(n) {}

    std::size_t size() const { return fft_.size(); }

    std::vector<cplx> transform(std::span<const double> x) const
    {
        auto half = fft_.forward(x);
        std::vector<cplx> out(size());
        for (std::size_t k = 0; k < size(); ++k)
            out[k] = k < half.size() ? half[k] : std::conj(half[size() - k]);
        return out;
    }

    std::vector<double> magnitudes(std::span<const double> x) const
    {
        const auto half = fft_.forward(x);
        std::vector<double> mag(size());
        for (std::size_t k = 0; k < size(); ++k)
            mag[k] = std::abs(k < half.size() ? half[k] : half[size() - k]);
        return mag;
    }

private:
    RealFft fft_;
};

// Full linear convolution, length a.size() + b.size() - 1.
inline std::vector<double> fft_convolve(std::span<const double> a, std::span<const double> b)
{
    if (a.empty() || b.empty())
        return {};
    const std::size_t out_len = a.size() + b.size() - 1;
    const RealFft fft(next_pow2(out_len));
    std::vector<double> pa(fft.size(), 0.0), pb(fft.size(), 0.0);
    std::copy(a.begin(), a.end(), pa.begin());
    std::copy(b.begin(), b.end(), pb.begin());
    auto fa = fft.forward(pa);
    const auto fb = fft.forward(pb);
    for (std::size_t k = 0; k < fa.size(); ++k)
        fa[k] *= fb[k];
    fft.inverse(fa, pa);
    pa.resize(out_len);
    const double scale = 1.0 / double(fft.size());
    for (auto& v : pa)
        v *= scale;
    return pa;
}

} // namespace sollu
