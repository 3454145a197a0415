#include "nnpf/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

#include "nnpf/bits.hpp"
#include "nnpf/quant.hpp"

namespace nnpf {

const char* precision_name(Precision p) {
    switch (p) {
        case Precision::Full: return "full";
        case Precision::Fp8: return "fp8";
        case Precision::Q3: return "q3";
    }
    return "?";
}

std::optional<Precision> precision_from_name(const std::string& s) {
    if (s == "full") return Precision::Full;
    if (s == "fp8") return Precision::Fp8;
    if (s == "q3") return Precision::Q3;
    return std::nullopt;
}

std::string NetworkConfig::validate() const {
    if (input_width <= 0) return "input width must be positive";
    if (hidden_widths.empty()) return "at least one hidden layer is required";
    if (hidden_widths.size() > 3) return "at most three hidden layers are supported";
    for (int w : hidden_widths)
        if (w <= 0) return "hidden widths must be positive";
    if (output_width <= 0) return "output width must be positive";
    if (subsets <= 0 || output_width % subsets != 0)
        return "output width must partition into equal subsets";
    if (precision == Precision::Q3 && activation != Activation::Relu)
        return "q3 precision requires relu activation";
    if (lstm_cells < 0) return "lstm cell count must be non-negative";
    if (learning_rate <= 0) return "learning rate must be positive";
    return {};
}

namespace {

constexpr char kNetMagic[8] = {'N', 'N', 'P', 'F', 'N', 'E', 'T', '1'};

double sigmoid(double z) {
    if (z > 40) return 1.0;
    if (z < -40) return 0.0;
    return 1.0 / (1.0 + std::exp(-z));
}

}  // namespace

double Network::activate(double z) const {
    switch (config_.activation) {
        case Activation::Sigmoid: return sigmoid(z);
        case Activation::Relu: return z > 0 ? z : 0.0;
    }
    return 0;
}

double Network::activate_derivative(double z, double a) const {
    switch (config_.activation) {
        case Activation::Sigmoid: return a * (1.0 - a);
        case Activation::Relu:
            // q3 trains with an identity straight-through estimator so error
            // still reaches units parked below zero by the quantized forward.
            if (config_.precision == Precision::Q3) return 1.0;
            return z > 0 ? 1.0 : 0.0;
    }
    return 0;
}

Network Network::init(const NetworkConfig& config) {
    std::string err = config.validate();
    if (!err.empty()) throw std::invalid_argument("invalid network config: " + err);

    Network net;
    net.config_ = config;
    std::mt19937_64 rng(config.rng_seed);

    auto glorot = [&rng](Eigen::MatrixXd& w) {
        const double limit = std::sqrt(6.0 / double(w.rows() + w.cols()));
        std::uniform_real_distribution<double> uni(-limit, limit);
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = uni(rng);
    };

    std::vector<int> in_widths{config.input_width};
    for (size_t l = 1; l < config.hidden_widths.size(); ++l)
        in_widths.push_back(config.hidden_widths[l - 1]);
    const int last_hidden = config.hidden_widths.back();

    for (size_t l = 0; l < config.hidden_widths.size(); ++l) {
        Eigen::MatrixXd w(config.hidden_widths[l], in_widths[l]);
        glorot(w);
        net.weights_.push_back(std::move(w));
        net.biases_.push_back(Eigen::VectorXd::Zero(config.hidden_widths[l]));
    }
    Eigen::MatrixXd wout(config.output_width, last_hidden + config.lstm_cells);
    glorot(wout);
    net.weights_.push_back(std::move(wout));
    net.biases_.push_back(Eigen::VectorXd::Zero(config.output_width));

    if (config.lstm_cells > 0) {
        const int gate_in = in_widths.back();
        for (int g = 0; g < 4; ++g) {
            Eigen::MatrixXd w(config.lstm_cells, gate_in);
            glorot(w);
            net.gate_w_.push_back(std::move(w));
            // forget gate starts open so early cells retain state
            net.gate_b_.push_back(g == 1 ? Eigen::VectorXd::Ones(config.lstm_cells)
                                         : Eigen::VectorXd::Zero(config.lstm_cells));
        }
        net.cell_ = Eigen::VectorXd::Zero(config.lstm_cells);
    }

    for (int l = 0; l < net.num_layers(); ++l) net.apply_store_rounding(l);
    if (config.precision == Precision::Fp8)
        for (auto& g : net.gate_w_) g = g.unaryExpr([](double v) { return fp8::quantize(v); });
    return net;
}

void Network::apply_store_rounding(int layer) {
    auto& w = weights_[size_t(layer)];
    auto& b = biases_[size_t(layer)];
    switch (config_.precision) {
        case Precision::Full:
            break;
        case Precision::Fp8:
            w = w.unaryExpr([](double v) { return fp8::quantize(v); });
            b = b.unaryExpr([](double v) { return fp8::quantize(v); });
            break;
        case Precision::Q3: {
            w = w.unaryExpr([](double v) { return std::clamp(v, -1.0, 0.75); });
            b = b.unaryExpr([](double v) { return std::clamp(v, -1.0, 0.75); });
            if (quantized_.size() != weights_.size()) {
                quantized_.resize(weights_.size());
                quantized_b_.resize(weights_.size());
            }
            quantized_[size_t(layer)] = w.unaryExpr([](double v) { return q3::quantize_weight(v); });
            quantized_b_[size_t(layer)] = b.unaryExpr([](double v) { return q3::quantize_weight(v); });
            break;
        }
    }
}

const Eigen::MatrixXd& Network::weight(int layer) const {
    if (config_.precision == Precision::Q3) return quantized_[size_t(layer)];
    return weights_[size_t(layer)];
}

const Eigen::VectorXd& Network::bias(int layer) const {
    if (config_.precision == Precision::Q3) return quantized_b_[size_t(layer)];
    return biases_[size_t(layer)];
}

void Network::set_weights(int layer, const Eigen::MatrixXd& w, const Eigen::VectorXd& b) {
    if (layer < 0 || layer >= num_layers()) throw std::out_of_range("layer index");
    if (w.rows() != weights_[size_t(layer)].rows() || w.cols() != weights_[size_t(layer)].cols())
        throw std::invalid_argument("set_weights: shape mismatch");
    weights_[size_t(layer)] = w;
    biases_[size_t(layer)] = b;
    apply_store_rounding(layer);
}

void Network::reset_lstm_state() {
    if (config_.lstm_cells > 0) cell_.setZero();
}

Eigen::VectorXd Network::layer_forward(int layer, const Eigen::VectorXd& x,
                                       Eigen::VectorXd& preact) const {
    const auto& w = weight(layer);
    const auto& b = bias(layer);
    if (config_.precision == Precision::Fp8) {
        preact.resize(w.rows());
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            FixedAccumulator acc;
            for (Eigen::Index c = 0; c < w.cols(); ++c) acc.add(w(r, c) * x(c));
            acc.add(b(r));
            preact(r) = acc.value();
        }
    } else {
        preact = w * x + b;
    }
    Eigen::VectorXd a = preact.unaryExpr([this](double z) { return activate(z); });
    if (config_.precision == Precision::Fp8)
        a = a.unaryExpr([](double v) { return fp8::quantize(v); });
    if (config_.precision == Precision::Q3) {
        // value activations live on the 3-bit grid; confidence neurons stay
        // analog since they are never interpreted as bits
        const bool is_output = layer == num_layers() - 1;
        const int sw = config_.subset_width();
        for (Eigen::Index i = 0; i < a.size(); ++i) {
            if (is_output && sw > 1 && (int(i) % sw) == sw - 1) continue;
            a(i) = q3::quantize_activation(a(i));
        }
    }
    return a;
}

InferenceResult Network::infer(const Eigen::VectorXd& input) {
    if (input.size() != config_.input_width)
        throw std::invalid_argument("infer: input width mismatch");

    InferenceResult res;
    const int hidden_layers = int(config_.hidden_widths.size());
    Eigen::VectorXd x = input;
    Eigen::VectorXd last_hidden_input;
    for (int l = 0; l < hidden_layers; ++l) {
        if (l == hidden_layers - 1) last_hidden_input = x;
        Eigen::VectorXd z;
        Eigen::VectorXd a = layer_forward(l, x, z);
        res.preacts.push_back(z);
        res.hidden_activations.push_back(a);
        x = std::move(a);
    }

    if (config_.lstm_cells > 0) {
        LstmTrace t;
        t.x = last_hidden_input;
        t.c_prev = cell_;
        auto gate = [&](int g, bool tanh_act) {
            Eigen::VectorXd z = gate_w_[size_t(g)] * t.x + gate_b_[size_t(g)];
            return tanh_act
                       ? Eigen::VectorXd(z.unaryExpr([](double v) { return std::tanh(v); }))
                       : Eigen::VectorXd(z.unaryExpr([](double v) { return sigmoid(v); }));
        };
        t.i = gate(0, false);
        t.f = gate(1, false);
        t.o = gate(2, false);
        t.g = gate(3, true);
        t.c_post = t.f.cwiseProduct(t.c_prev) + t.i.cwiseProduct(t.g);
        t.h = t.o.cwiseProduct(t.c_post.unaryExpr([](double v) { return std::tanh(v); }));
        cell_ = t.c_post;

        res.features.resize(x.size() + t.h.size());
        res.features << x, t.h;
        res.lstm = std::move(t);
    } else {
        res.features = x;
    }

    res.output_activations = layer_forward(num_layers() - 1, res.features, res.output_preact);
    ++step_count_;
    return res;
}

InferenceResult Network::infer(const ContextState& input) { return infer(context_to_input(input)); }

Gradients Network::gradients(const InferenceResult& cached, const Eigen::VectorXd& input,
                             int subset, const Eigen::VectorXd& targets,
                             const std::vector<bool>& mask) const {
    const int sw = config_.subset_width();
    if (subset < 0 || subset >= config_.subsets)
        throw std::out_of_range("train: output subset out of range");
    if (targets.size() != sw || int(mask.size()) != sw)
        throw std::invalid_argument("train: target/mask width must equal the subset width");

    const int hidden_layers = int(config_.hidden_widths.size());
    Gradients g;
    g.dW.resize(size_t(num_layers()));
    g.db.resize(size_t(num_layers()));

    // Output-layer error, zero outside the masked subset neurons. The error is
    // taken against the interpreted value, so activations already saturated
    // past the bit-reading range stop generating gradient.
    Eigen::VectorXd err = Eigen::VectorXd::Zero(config_.output_width);
    for (int k = 0; k < sw; ++k) {
        if (!mask[size_t(k)]) continue;
        const double a = interpretable_activation(cached.output_activations(subset * sw + k),
                                                  config_.activation);
        err(subset * sw + k) = a - targets(k);
    }

    Eigen::VectorXd delta_out(config_.output_width);
    for (int j = 0; j < config_.output_width; ++j)
        delta_out(j) =
            err(j) * activate_derivative(cached.output_preact(j), cached.output_activations(j));

    const int out_layer = num_layers() - 1;
    g.dW[size_t(out_layer)] = delta_out * cached.features.transpose();
    g.db[size_t(out_layer)] = delta_out;

    Eigen::VectorXd back = weight(out_layer).transpose() * delta_out;

    // LSTM gate gradients from the cell-output share of the feature vector.
    Eigen::VectorXd lstm_to_x;
    if (config_.lstm_cells > 0) {
        const auto& t = *cached.lstm;
        const int nh = config_.hidden_widths.back();
        Eigen::VectorXd dh = back.segment(nh, config_.lstm_cells);
        back = back.head(nh).eval();

        Eigen::VectorXd tanh_c = t.c_post.unaryExpr([](double v) { return std::tanh(v); });
        Eigen::VectorXd d_o = dh.cwiseProduct(tanh_c)
                                  .cwiseProduct(t.o.cwiseProduct(Eigen::VectorXd::Ones(t.o.size()) - t.o));
        Eigen::VectorXd dc = dh.cwiseProduct(t.o).cwiseProduct(
            Eigen::VectorXd::Ones(tanh_c.size()) - tanh_c.cwiseProduct(tanh_c));
        Eigen::VectorXd d_i = dc.cwiseProduct(t.g).cwiseProduct(
            t.i.cwiseProduct(Eigen::VectorXd::Ones(t.i.size()) - t.i));
        Eigen::VectorXd d_f = dc.cwiseProduct(t.c_prev)
                                  .cwiseProduct(t.f.cwiseProduct(Eigen::VectorXd::Ones(t.f.size()) - t.f));
        Eigen::VectorXd d_g = dc.cwiseProduct(t.i).cwiseProduct(
            Eigen::VectorXd::Ones(t.g.size()) - t.g.cwiseProduct(t.g));

        g.dWg = {d_i * t.x.transpose(), d_f * t.x.transpose(), d_o * t.x.transpose(),
                 d_g * t.x.transpose()};
        g.dbg = {d_i, d_f, d_o, d_g};
        lstm_to_x = gate_w_[0].transpose() * d_i + gate_w_[1].transpose() * d_f +
                    gate_w_[2].transpose() * d_o + gate_w_[3].transpose() * d_g;
    }

    for (int l = hidden_layers - 1; l >= 0; --l) {
        Eigen::VectorXd delta(config_.hidden_widths[size_t(l)]);
        for (int j = 0; j < config_.hidden_widths[size_t(l)]; ++j)
            delta(j) = back(j) * activate_derivative(cached.preacts[size_t(l)](j),
                                                     cached.hidden_activations[size_t(l)](j));
        const Eigen::VectorXd& layer_in = (l == 0) ? input : cached.hidden_activations[size_t(l - 1)];
        g.dW[size_t(l)] = delta * layer_in.transpose();
        g.db[size_t(l)] = delta;
        back = weight(l).transpose() * delta;
        if (l == hidden_layers - 1 && lstm_to_x.size() > 0) back += lstm_to_x;
    }
    return g;
}

void Network::train(const InferenceResult& cached, const Eigen::VectorXd& input, int subset,
                    const Eigen::VectorXd& targets, const std::vector<bool>& mask, double lr) {
    Gradients g = gradients(cached, input, subset, targets, mask);
    for (int l = 0; l < num_layers(); ++l) {
        weights_[size_t(l)] -= lr * g.dW[size_t(l)];
        biases_[size_t(l)] -= lr * g.db[size_t(l)];
        apply_store_rounding(l);
    }
    if (!g.dWg.empty()) {
        for (int gi = 0; gi < 4; ++gi) {
            gate_w_[size_t(gi)] -= lr * g.dWg[size_t(gi)];
            gate_b_[size_t(gi)] -= lr * g.dbg[size_t(gi)];
            if (config_.precision == Precision::Fp8) {
                gate_w_[size_t(gi)] =
                    gate_w_[size_t(gi)].unaryExpr([](double v) { return fp8::quantize(v); });
                gate_b_[size_t(gi)] =
                    gate_b_[size_t(gi)].unaryExpr([](double v) { return fp8::quantize(v); });
            }
        }
    }
}

// --- output interpretation -------------------------------------------------

double interpretable_activation(double a, Activation act) {
    if (act == Activation::Sigmoid) return a;
    return std::clamp(a, 0.0, 1.0);
}

uint16_t delta_to_bits(int64_t delta_lines) {
    return uint16_t(encode_twos_complement(delta_lines, 15));
}

int64_t bits_to_delta(uint16_t bits) { return decode_twos_complement(bits, 15); }

std::optional<Prediction> interpret_output(const InferenceResult& result,
                                           const NetworkConfig& config, int subset, double hi,
                                           double lo) {
    if (config.subset_width() != 16)
        throw std::invalid_argument("interpret_output: subset width must be 16");
    if (subset < 0 || subset >= config.subsets)
        throw std::out_of_range("interpret_output: subset out of range");
    const int base = subset * 16;
    uint16_t bits = 0;
    for (int k = 0; k < 15; ++k) {
        double v = interpretable_activation(result.output_activations(base + k), config.activation);
        if (v >= hi)
            bits |= uint16_t(1u << (14 - k));  // neuron 0 is the sign bit
        else if (v <= lo)
            ;  // zero bit
        else
            return std::nullopt;  // indistinct output suppresses the prediction
    }
    int64_t delta = bits_to_delta(bits);
    if (delta == 0) return std::nullopt;  // would prefetch the triggering line
    Prediction p;
    p.delta_lines = delta;
    p.confidence = result.output_activations(base + 15);
    return p;
}

uint16_t rounded_subset_bits(const InferenceResult& result, const NetworkConfig& config,
                             int subset) {
    const int base = subset * config.subset_width();
    uint16_t bits = 0;
    for (int k = 0; k < 15; ++k) {
        double v = interpretable_activation(result.output_activations(base + k), config.activation);
        if (v >= 0.5) bits |= uint16_t(1u << (14 - k));
    }
    return bits;
}

int bit_match_distance(const BitVec& a, const BitVec& b) {
    if (a.width != b.width) throw std::invalid_argument("bit_match_distance: width mismatch");
    const uint64_t mask = a.width >= 64 ? ~0ull : ((1ull << a.width) - 1);
    return std::popcount((a.bits ^ b.bits) & mask);
}

Eigen::VectorXd context_to_input(const ContextState& s) {
    Eigen::VectorXd v(ContextState::kBits);
    for (int i = 0; i < ContextState::kBits; ++i) v(i) = s.get_bit(i) ? 1.0 : 0.0;
    return v;
}

// --- checkpointing -----------------------------------------------------------

namespace {

void put_u64(std::ostream& os, uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = char((v >> (8 * i)) & 0xFF);
    os.write(b, 8);
}

uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
    return v;
}

void put_f64(std::ostream& os, double d) {
    uint64_t v;
    std::memcpy(&v, &d, 8);
    put_u64(os, v);
}

double get_f64(std::istream& is) {
    uint64_t v = get_u64(is);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

void put_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
    put_u64(os, uint64_t(m.rows()));
    put_u64(os, uint64_t(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(os, m(r, c));
}

Eigen::MatrixXd get_matrix(std::istream& is) {
    auto rows = Eigen::Index(get_u64(is));
    auto cols = Eigen::Index(get_u64(is));
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = get_f64(is);
    return m;
}

void put_vector(std::ostream& os, const Eigen::VectorXd& v) {
    put_u64(os, uint64_t(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) put_f64(os, v(i));
}

Eigen::VectorXd get_vector(std::istream& is) {
    auto n = Eigen::Index(get_u64(is));
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = get_f64(is);
    return v;
}

}  // namespace

void Network::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    os.write(kNetMagic, 8);
    put_u64(os, 1);  // version
    put_u64(os, uint64_t(config_.input_width));
    put_u64(os, config_.hidden_widths.size());
    for (int w : config_.hidden_widths) put_u64(os, uint64_t(w));
    put_u64(os, uint64_t(config_.output_width));
    put_u64(os, uint64_t(config_.subsets));
    put_u64(os, uint64_t(config_.precision));
    put_u64(os, uint64_t(config_.activation));
    put_u64(os, uint64_t(config_.lstm_cells));
    put_f64(os, config_.learning_rate);
    put_u64(os, config_.rng_seed);
    put_u64(os, step_count_);
    for (int l = 0; l < num_layers(); ++l) {
        put_matrix(os, weights_[size_t(l)]);
        put_vector(os, biases_[size_t(l)]);
    }
    for (size_t g = 0; g < gate_w_.size(); ++g) {
        put_matrix(os, gate_w_[g]);
        put_vector(os, gate_b_[g]);
    }
    if (config_.lstm_cells > 0) put_vector(os, cell_);
    if (!os) throw std::runtime_error("short write to checkpoint: " + path);
}

Network Network::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kNetMagic, 8) != 0)
        throw std::runtime_error("bad checkpoint magic: " + path);
    if (get_u64(is) != 1) throw std::runtime_error("unsupported checkpoint version: " + path);

    NetworkConfig cfg;
    cfg.input_width = int(get_u64(is));
    cfg.hidden_widths.resize(get_u64(is));
    for (auto& w : cfg.hidden_widths) w = int(get_u64(is));
    cfg.output_width = int(get_u64(is));
    cfg.subsets = int(get_u64(is));
    cfg.precision = Precision(get_u64(is));
    cfg.activation = Activation(get_u64(is));
    cfg.lstm_cells = int(get_u64(is));
    cfg.learning_rate = get_f64(is);
    cfg.rng_seed = get_u64(is);

    Network net = Network::init(cfg);
    net.step_count_ = get_u64(is);
    for (int l = 0; l < net.num_layers(); ++l) {
        net.weights_[size_t(l)] = get_matrix(is);
        net.biases_[size_t(l)] = get_vector(is);
        net.apply_store_rounding(l);
    }
    for (size_t g = 0; g < net.gate_w_.size(); ++g) {
        net.gate_w_[g] = get_matrix(is);
        net.gate_b_[g] = get_vector(is);
    }
    if (cfg.lstm_cells > 0) net.cell_ = get_vector(is);
    if (!is) throw std::runtime_error("truncated checkpoint: " + path);
    return net;
}

bool Network::operator==(const Network& other) const {
    auto cfg_eq = [](const NetworkConfig& a, const NetworkConfig& b) {
        return a.input_width == b.input_width && a.hidden_widths == b.hidden_widths &&
               a.output_width == b.output_width && a.subsets == b.subsets &&
               a.precision == b.precision && a.activation == b.activation &&
               a.lstm_cells == b.lstm_cells && a.learning_rate == b.learning_rate &&
               a.rng_seed == b.rng_seed;
    };
    if (!cfg_eq(config_, other.config_) || step_count_ != other.step_count_) return false;
    for (size_t l = 0; l < weights_.size(); ++l)
        if (weights_[l] != other.weights_[l] || biases_[l] != other.biases_[l]) return false;
    for (size_t g = 0; g < gate_w_.size(); ++g)
        if (gate_w_[g] != other.gate_w_[g] || gate_b_[g] != other.gate_b_[g]) return false;
    if (config_.lstm_cells > 0 && cell_ != other.cell_) return false;
    return true;
}

}  // namespace nnpf
