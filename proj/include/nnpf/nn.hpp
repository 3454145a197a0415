#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nnpf/context.hpp"

namespace nnpf {

enum class Precision { Full, Fp8, Q3 };
enum class Activation { Sigmoid, Relu };

const char* precision_name(Precision p);
std::optional<Precision> precision_from_name(const std::string& s);

struct NetworkConfig {
    int input_width = 128;
    std::vector<int> hidden_widths{32};
    int output_width = 32;
    int subsets = 2;  // equal output-layer partitions
    Precision precision = Precision::Full;
    Activation activation = Activation::Sigmoid;
    int lstm_cells = 0;  // appended to the last hidden layer when > 0
    double learning_rate = 0.05;
    uint64_t rng_seed = 1;

    int subset_width() const { return output_width / subsets; }
    std::string validate() const;  // empty when valid
};

// Per-inference LSTM snapshot, kept so a later training pass can replay the
// backward step from the values that produced the cached prediction.
struct LstmTrace {
    Eigen::VectorXd x;  // gate input (the last hidden layer's input)
    Eigen::VectorXd i, f, o, g;
    Eigen::VectorXd c_prev, c_post, h;
};

struct InferenceResult {
    std::vector<Eigen::VectorXd> preacts;            // z per hidden layer
    std::vector<Eigen::VectorXd> hidden_activations; // a per hidden layer
    Eigen::VectorXd features;          // [a_last ; lstm h] feeding the output layer
    Eigen::VectorXd output_preact;
    Eigen::VectorXd output_activations;
    std::optional<LstmTrace> lstm;
};

struct Gradients {
    std::vector<Eigen::MatrixXd> dW;  // hidden layers then output layer
    std::vector<Eigen::VectorXd> db;
    // LSTM gate gradients in (input, forget, output, candidate) order; empty
    // without cells.
    std::vector<Eigen::MatrixXd> dWg;
    std::vector<Eigen::VectorXd> dbg;
};

class Network {
public:
    static Network init(const NetworkConfig& config);

    const NetworkConfig& config() const { return config_; }
    uint64_t step_count() const { return step_count_; }
    int num_layers() const { return int(weights_.size()); }  // hidden + output

    // Feed-forward pass. Mutates only the LSTM cell state and step counter.
    InferenceResult infer(const Eigen::VectorXd& input);
    InferenceResult infer(const ContextState& input);

    // One gradient-descent step of the bitwise square error on `subset`.
    // `targets` holds subset_width desired values; `mask` selects which of the
    // subset's neurons contribute error. Hidden layers receive the error
    // back-propagated through the full output layer. `cached` may be stale.
    void train(const InferenceResult& cached, const Eigen::VectorXd& input, int subset,
               const Eigen::VectorXd& targets, const std::vector<bool>& mask, double lr);

    // Analytic gradients of 0.5 * sum((out - target)^2) over the masked subset
    // neurons, evaluated at `cached`. Shared by train(); exposed for oracles.
    Gradients gradients(const InferenceResult& cached, const Eigen::VectorXd& input, int subset,
                        const Eigen::VectorXd& targets, const std::vector<bool>& mask) const;

    // Effective (inference-path) weights. For q3 these are the quantized
    // copies; the full-precision shadows live behind shadow_weight().
    const Eigen::MatrixXd& weight(int layer) const;
    const Eigen::VectorXd& bias(int layer) const;
    const Eigen::MatrixXd& shadow_weight(int layer) const { return weights_[size_t(layer)]; }
    const Eigen::MatrixXd& gate_weight(int gate) const { return gate_w_[size_t(gate)]; }
    const Eigen::VectorXd& lstm_cell_state() const { return cell_; }
    void set_weights(int layer, const Eigen::MatrixXd& w, const Eigen::VectorXd& b);

    void reset_lstm_state();

    void save(const std::string& path) const;
    static Network load(const std::string& path);

    bool operator==(const Network& other) const;

private:
    Network() = default;
    void apply_store_rounding(int layer);
    double activate(double z) const;
    double activate_derivative(double z, double a) const;
    Eigen::VectorXd layer_forward(int layer, const Eigen::VectorXd& x,
                                  Eigen::VectorXd& preact) const;

    NetworkConfig config_;
    // weights_[l]: rows = layer l width, cols = its input width. The last
    // entry is the output layer over [hidden ; lstm] features.
    std::vector<Eigen::MatrixXd> weights_;
    std::vector<Eigen::VectorXd> biases_;
    std::vector<Eigen::MatrixXd> quantized_;  // q3 inference copies
    std::vector<Eigen::VectorXd> quantized_b_;
    std::vector<Eigen::MatrixXd> gate_w_;  // input, forget, output, candidate
    std::vector<Eigen::VectorXd> gate_b_;
    Eigen::VectorXd cell_;
    uint64_t step_count_ = 0;
};

// --- output interpretation -------------------------------------------------

struct Prediction {
    int64_t delta_lines = 0;
    double confidence = 0.0;
};

// Decode one 16-wide output subset as 15 two's-complement delta bits plus a
// confidence neuron. Value neurons map to 1 at >= hi and 0 at <= lo; any
// neuron between the thresholds suppresses the prediction, as does a decoded
// delta of zero. Neuron 0 carries the sign (most significant) bit.
std::optional<Prediction> interpret_output(const InferenceResult& result,
                                           const NetworkConfig& config, int subset,
                                           double hi, double lo);

// Subset value bits rounded at 0.5, for candidate matching.
uint16_t rounded_subset_bits(const InferenceResult& result, const NetworkConfig& config,
                             int subset);

uint16_t delta_to_bits(int64_t delta_lines);   // 15-bit two's complement
int64_t bits_to_delta(uint16_t bits);

// Output value clamped to the [0,1] interpretation range (identity for
// sigmoid outputs).
double interpretable_activation(double a, Activation act);

struct BitVec {
    uint64_t bits = 0;
    int width = 0;
};

// Hamming distance; widths must match.
int bit_match_distance(const BitVec& a, const BitVec& b);

Eigen::VectorXd context_to_input(const ContextState& s);

}  // namespace nnpf
