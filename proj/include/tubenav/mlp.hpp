#ifndef TUBENAV_MLP_HPP
#define TUBENAV_MLP_HPP

#include <cstddef>
#include <vector>

#include "tubenav/rng.hpp"

namespace tubenav {

// Running per-dimension mean/variance (Welford with batched Chan merges).
struct ObsNorm {
    std::vector<double> mean;
    std::vector<double> m2; // sum of squared deviations
    double count = 0.0;

    static constexpr double kEps = 1e-8;

    explicit ObsNorm(int dim = 0) : mean(dim, 0.0), m2(dim, 0.0) {}

    int dim() const { return static_cast<int>(mean.size()); }
    double variance(int i) const { return count > 0.0 ? m2[i] / count : 1.0; }

    void update_batch(const double* obs, int n_rows, int dim);
    // (x - mean) / sqrt(var + eps), clipped to [-10, 10].
    void normalize(const double* in, double* out, int dim) const;
};

// Shared tanh trunk with linear policy/value heads. Weights are stored in one
// flat vector; the Dims table gives each block's offset (row-major W[out][in]).
struct MlpDims {
    int obs = 37;
    int h1 = 256;
    int h2 = 128;
    int actions = 36;

    std::size_t w1_off() const { return 0; }
    std::size_t b1_off() const { return w1_off() + static_cast<std::size_t>(h1) * obs; }
    std::size_t w2_off() const { return b1_off() + h1; }
    std::size_t b2_off() const { return w2_off() + static_cast<std::size_t>(h2) * h1; }
    std::size_t wp_off() const { return b2_off() + h2; }
    std::size_t bp_off() const { return wp_off() + static_cast<std::size_t>(actions) * h2; }
    std::size_t wv_off() const { return bp_off() + actions; }
    std::size_t bv_off() const { return wv_off() + h2; }
    std::size_t total() const { return bv_off() + 1; }
};

struct PolicyParams {
    MlpDims dims;
    std::vector<double> theta;
    ObsNorm norm;

    static PolicyParams init(const MlpDims& dims, Rng& rng);
    bool finite() const;
};

struct ForwardCache {
    std::vector<double> x;  // normalized input
    std::vector<double> h1; // tanh activations
    std::vector<double> h2;
    std::vector<double> logits;
    double value = 0.0;
};

// Deterministic forward pass; rejects non-finite observations.
void policy_forward(const PolicyParams& params, const double* obs_raw, ForwardCache& cache);

// Accumulates dL/dtheta into grad given upstream dL/dlogits and dL/dvalue.
void policy_backward(const PolicyParams& params, const ForwardCache& cache, const double* dlogits,
                     double dvalue, std::vector<double>& grad);

void log_softmax(const std::vector<double>& logits, std::vector<double>& out);
double entropy_from_log_probs(const std::vector<double>& logp);
int argmax_action(const std::vector<double>& logits); // ties resolve to the lower index
int sample_action(const std::vector<double>& logits, Rng& rng, double* logp_out);

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void ensure_size(std::size_t n);
    void step(std::vector<double>& theta, const std::vector<double>& grad, double lr);
};

} // namespace tubenav

#endif
