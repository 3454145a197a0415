#pragma once

#include <cstdint>
#include <vector>

namespace nnpf {

// 1-4-3 minifloat (sign / 4 exponent bits, bias 7 / 3 mantissa bits).
// No inf/nan codes; values saturate at +-480. Subnormals are kept.
namespace fp8 {

double decode(uint8_t code);
uint8_t encode(double x);          // round-to-nearest-even, saturating
double quantize(double x);         // decode(encode(x))
bool representable(double x);
double max_value();

}  // namespace fp8

// Signed Q8.8 fixed point with saturating accumulation, mirroring a 16-bit
// hardware accumulator per systolic row.
class FixedAccumulator {
public:
    void add(double x);
    double value() const;

private:
    int32_t acc_ = 0;  // widened for saturation checks; clamped to int16 range

    static constexpr int kFracBits = 8;
    static constexpr int32_t kMax = 32767;
    static constexpr int32_t kMin = -32768;
};

// Uniform 3-bit codebooks used by the quantized network.
// Weights: {-1.0, -0.75, ..., +0.75}; activations: {0, 0.25, ..., 1.75}.
namespace q3 {

double quantize_weight(double x);
double quantize_activation(double x);
bool weight_representable(double x);
bool activation_representable(double x);
const std::vector<double>& weight_codebook();

}  // namespace q3

}  // namespace nnpf
