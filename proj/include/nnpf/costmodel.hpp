#pragma once

#include <cstdint>
#include <string>

#include "nnpf/nn.hpp"

namespace nnpf {

// Hardware-cost estimate for a network configuration plus its association
// queue. Every constant in the energy chain is exposed so the derivation can
// be audited from the report alone.
struct CostReport {
    uint64_t fma_per_inference = 0;
    uint64_t fma_per_training = 0;   // inference-equivalent deltas + hidden error pre-pass
    uint64_t weight_storage_bytes = 0;
    uint64_t queue_storage_bytes = 0;
    uint64_t storage_bytes = 0;
    double energy_per_step_pj = 0.0;  // one training pass at the configured precision
    uint64_t systolic_phases = 0;

    // energy chain factors
    double base_fma_pj_45nm = 0.0;  // fp32 or fp16 baseline
    double process_factor = 0.0;    // 45nm -> 14nm efficiency
    double precision_factor = 0.0;  // additional gain below the baseline width
    double area_mm2 = 0.0;          // 32x32 FMA array, informational

    std::string to_text() const;
};

struct CostConstants {
    double fp32_fma_pj_45nm = 4.6;
    double fp16_fma_pj_45nm = 1.5;
    double process_factor = 4.0;      // two generations at ~1.6x-2x each
    double fp8_vs_fp16 = 3.5;         // 8-bit FP against fp16
    double q3_vs_fp8 = 6.0;           // quantized multiply against 8-bit FP
    double fma_cell_um2_28nm = 2000;  // single FMA cell footprint
    int array_dim = 32;
};

// Pure function of the configuration; monotone in every width parameter.
CostReport estimate(const NetworkConfig& config, uint64_t queue_entries,
                    const CostConstants& constants = {});

// Weight-storage bytes for a (hidden width, precision bits) point; used for
// storage-scaling sweeps.
uint64_t weight_storage_for(int input_width, int hidden_width, int output_width,
                            int precision_bits);

}  // namespace nnpf
