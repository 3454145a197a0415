#include "nnpf/costmodel.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace nnpf {

namespace {

int precision_bits(Precision p) {
    switch (p) {
        case Precision::Full: return 32;
        case Precision::Fp8: return 8;
        case Precision::Q3: return 3;
    }
    return 32;
}

uint64_t ceil_div(uint64_t a, uint64_t b) { return (a + b - 1) / b; }

}  // namespace

uint64_t weight_storage_for(int input_width, int hidden_width, int output_width,
                            int bits) {
    uint64_t weights = uint64_t(input_width) * uint64_t(hidden_width) +
                       uint64_t(hidden_width) * uint64_t(output_width);
    return ceil_div(weights * uint64_t(bits), 8);
}

CostReport estimate(const NetworkConfig& config, uint64_t queue_entries,
                    const CostConstants& k) {
    std::string err = config.validate();
    if (!err.empty()) throw std::invalid_argument("invalid network config: " + err);

    CostReport r;

    // FMA counts: one multiply-accumulate per weight on the forward path.
    std::vector<uint64_t> widths{uint64_t(config.input_width)};
    for (int w : config.hidden_widths) widths.push_back(uint64_t(w));
    const uint64_t feature_width = widths.back() + uint64_t(config.lstm_cells);

    uint64_t fma = 0;
    for (size_t l = 1; l < widths.size(); ++l) fma += widths[l - 1] * widths[l];
    fma += feature_width * uint64_t(config.output_width);
    if (config.lstm_cells > 0) {
        // four gates fed by the last hidden layer's input, plus the cell update
        fma += 4 * widths[widths.size() - 2] * uint64_t(config.lstm_cells);
        fma += 2 * uint64_t(config.lstm_cells);
    }
    r.fma_per_inference = fma;

    // Training replays the per-weight delta computation and adds the weighted
    // error pre-pass for every hidden neuron (one FMA per output-side weight).
    uint64_t prepass = 0;
    for (size_t l = 1; l + 1 < widths.size(); ++l) prepass += widths[l] * widths[l + 1];
    prepass += feature_width * uint64_t(config.output_width);
    r.fma_per_training = fma + prepass;

    // Storage: weights at the stored precision plus the association queue
    // (16-byte context and one byte per cached neuron value).
    uint64_t n_weights = 0;
    for (size_t l = 1; l < widths.size(); ++l) n_weights += widths[l - 1] * widths[l];
    n_weights += feature_width * uint64_t(config.output_width);
    if (config.lstm_cells > 0) n_weights += 4 * widths[widths.size() - 2] * uint64_t(config.lstm_cells);
    const int bits = precision_bits(config.precision);
    r.weight_storage_bytes = ceil_div(n_weights * uint64_t(bits), 8);

    uint64_t cached_neurons = uint64_t(config.output_width) + feature_width;
    for (size_t l = 1; l + 1 < widths.size(); ++l) cached_neurons += widths[l];
    r.queue_storage_bytes = queue_entries * (16 + cached_neurons);
    r.storage_bytes = r.weight_storage_bytes + r.queue_storage_bytes;

    // Energy: per-FMA cost at 14nm for the configured precision, applied to
    // one training pass.
    switch (config.precision) {
        case Precision::Full:
            r.base_fma_pj_45nm = k.fp32_fma_pj_45nm;
            r.precision_factor = 1.0;
            break;
        case Precision::Fp8:
            r.base_fma_pj_45nm = k.fp16_fma_pj_45nm;
            r.precision_factor = k.fp8_vs_fp16;
            break;
        case Precision::Q3:
            r.base_fma_pj_45nm = k.fp16_fma_pj_45nm;
            r.precision_factor = k.fp8_vs_fp16 * k.q3_vs_fp8;
            break;
    }
    r.process_factor = k.process_factor;
    const double pj_per_fma = r.base_fma_pj_45nm / r.process_factor / r.precision_factor;
    r.energy_per_step_pj = double(r.fma_per_training) * pj_per_fma;

    // Systolic schedule: input phases stream the context vector through the
    // array; later layers take one phase per weight tile.
    const uint64_t dim = uint64_t(k.array_dim);
    uint64_t phases = ceil_div(uint64_t(config.input_width), dim) * ceil_div(widths[1], dim);
    for (size_t l = 2; l < widths.size(); ++l)
        phases += ceil_div(widths[l - 1] * widths[l], dim * dim);
    phases += ceil_div(feature_width * uint64_t(config.output_width), dim * dim);
    r.systolic_phases = phases;

    // Informational: FMA array footprint after process scaling.
    r.area_mm2 = double(dim * dim) * k.fma_cell_um2_28nm / 4.0 / 1e6;
    return r;
}

std::string CostReport::to_text() const {
    std::ostringstream os;
    os << "fma_per_inference:   " << fma_per_inference << "\n"
       << "fma_per_training:    " << fma_per_training << "\n"
       << "weight_storage:      " << weight_storage_bytes << " B\n"
       << "queue_storage:       " << queue_storage_bytes << " B\n"
       << "total_storage:       " << storage_bytes << " B\n"
       << "systolic_phases:     " << systolic_phases << "\n"
       << "energy_per_step:     " << energy_per_step_pj << " pJ\n"
       << "  base fma @45nm:    " << base_fma_pj_45nm << " pJ\n"
       << "  process factor:    " << process_factor << "x\n"
       << "  precision factor:  " << precision_factor << "x\n"
       << "array_area (info):   " << area_mm2 << " mm^2\n";
    return os.str();
}

}  // namespace nnpf
