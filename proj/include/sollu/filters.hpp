#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace sollu {

struct Biquad {
    double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;

    void apply(std::span<double> x) const
    {
        double z1 = 0.0, z2 = 0.0;
        for (double& v : x) {
            const double y = b0 * v + z1;
            z1 = b1 * v - a1 * y + z2;
            z2 = b2 * v - a2 * y;
            v = y;
        }
    }
};

enum class FilterKind { lowpass, highpass };

inline Biquad make_biquad(FilterKind kind, double fc, double fs, double q)
{
    const double w0 = 2.0 * std::numbers::pi * fc / fs;
    const double c = std::cos(w0), alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    Biquad bq;
    if (kind == FilterKind::lowpass) {
        bq.b0 = bq.b2 = (1.0 - c) / 2.0 / a0;
        bq.b1 = (1.0 - c) / a0;
    } else {
        bq.b0 = bq.b2 = (1.0 + c) / 2.0 / a0;
        bq.b1 = -(1.0 + c) / a0;
    }
    bq.a1 = -2.0 * c / a0;
    bq.a2 = (1.0 - alpha) / a0;
    return bq;
}

// Even-order Butterworth as cascaded second-order sections.
inline std::vector<Biquad> butterworth(FilterKind kind, int order, double fc, double fs)
{
    std::vector<Biquad> out;
    for (int k = 0; k < order / 2; ++k) {
        const double theta = std::numbers::pi * double(2 * k + 1) / double(2 * order);
        out.push_back(make_biquad(kind, fc, fs, 1.0 / (2.0 * std::cos(theta))));
    }
    return out;
}

inline void apply_cascade(std::span<const Biquad> sections, std::span<double> x)
{
    for (const auto& s : sections)
        s.apply(x);
}

} // namespace sollu
