#include "nnpf/quant.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace nnpf {

namespace fp8 {

namespace {

// All 128 non-negative values, index == code. Built once; encode() walks it
// with a binary search so tie-to-even handling stays table-driven.
const std::array<double, 128>& magnitude_table() {
    static const std::array<double, 128> table = [] {
        std::array<double, 128> t{};
        for (int code = 0; code < 128; ++code) {
            int e = code >> 3;
            int m = code & 7;
            if (e == 0)
                t[size_t(code)] = std::ldexp(double(m) / 8.0, -6);  // subnormal
            else
                t[size_t(code)] = std::ldexp(1.0 + double(m) / 8.0, e - 7);
        }
        return t;
    }();
    return table;
}

}  // namespace

double decode(uint8_t code) {
    double mag = magnitude_table()[code & 0x7F];
    return (code & 0x80) ? -mag : mag;
}

uint8_t encode(double x) {
    const auto& t = magnitude_table();
    uint8_t sign = 0;
    if (std::signbit(x)) {
        sign = 0x80;
        x = -x;
    }
    if (std::isnan(x)) return sign;  // quiet: store zero
    if (x >= t[127]) return sign | 127;
    auto it = std::lower_bound(t.begin(), t.end(), x);
    int hi = int(it - t.begin());
    if (t[size_t(hi)] == x) return sign | uint8_t(hi);
    int lo = hi - 1;  // hi >= 1 because t[0] == 0 <= x
    double dlo = x - t[size_t(lo)];
    double dhi = t[size_t(hi)] - x;
    int code;
    if (dlo < dhi)
        code = lo;
    else if (dhi < dlo)
        code = hi;
    else
        code = (lo % 2 == 0) ? lo : hi;  // exact tie: even mantissa LSB wins
    return sign | uint8_t(code);
}

double quantize(double x) { return decode(encode(x)); }

bool representable(double x) { return decode(encode(x)) == x; }

double max_value() { return magnitude_table()[127]; }

}  // namespace fp8

void FixedAccumulator::add(double x) {
    int32_t fx = int32_t(std::lround(x * double(1 << kFracBits)));
    acc_ = std::clamp(acc_ + fx, kMin, kMax);
}

double FixedAccumulator::value() const { return double(acc_) / double(1 << kFracBits); }

namespace q3 {

namespace {
constexpr double kStep = 0.25;
}

double quantize_weight(double x) {
    double q = std::round(x / kStep) * kStep;
    return std::clamp(q, -1.0, 0.75);
}

double quantize_activation(double x) {
    double q = std::round(x / kStep) * kStep;
    return std::clamp(q, 0.0, 1.75);
}

bool weight_representable(double x) { return quantize_weight(x) == x; }

bool activation_representable(double x) { return quantize_activation(x) == x; }

const std::vector<double>& weight_codebook() {
    static const std::vector<double> cb = [] {
        std::vector<double> v;
        for (int k = -4; k <= 3; ++k) v.push_back(double(k) * kStep);
        return v;
    }();
    return cb;
}

}  // namespace q3

}  // namespace nnpf
