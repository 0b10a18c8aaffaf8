#include "tubenav/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tubenav {

void ObsNorm::update_batch(const double* obs, int n_rows, int dim) {
    if (dim != this->dim()) throw std::invalid_argument("obs norm dimension mismatch");
    if (n_rows <= 0) return;
    for (int j = 0; j < dim; ++j) {
        double bmean = 0.0;
        for (int r = 0; r < n_rows; ++r) bmean += obs[static_cast<std::size_t>(r) * dim + j];
        bmean /= n_rows;
        double bm2 = 0.0;
        for (int r = 0; r < n_rows; ++r) {
            const double d = obs[static_cast<std::size_t>(r) * dim + j] - bmean;
            bm2 += d * d;
        }
        const double delta = bmean - mean[j];
        const double tot = count + n_rows;
        mean[j] += delta * n_rows / tot;
        m2[j] += bm2 + delta * delta * count * n_rows / tot;
    }
    count += n_rows;
}

void ObsNorm::normalize(const double* in, double* out, int dim) const {
    for (int j = 0; j < dim; ++j) {
        const double v = count > 0.0 ? m2[j] / count : 1.0;
        out[j] = std::clamp((in[j] - mean[j]) / std::sqrt(v + kEps), -10.0, 10.0);
    }
}

namespace {

// Semi-orthogonal matrix via modified Gram-Schmidt on the shorter side.
void orthogonal_init(double* w, int rows, int cols, double gain, Rng& rng) {
    const bool wide = cols >= rows; // orthonormalize rows if they fit, else columns
    const int n_vecs = wide ? rows : cols;
    const int vec_len = wide ? cols : rows;
    std::vector<std::vector<double>> vecs(n_vecs, std::vector<double>(vec_len));
    for (auto& v : vecs)
        for (double& x : v) x = rng.normal();
    for (int i = 0; i < n_vecs; ++i) {
        for (int k = 0; k < i; ++k) {
            double proj = 0.0;
            for (int j = 0; j < vec_len; ++j) proj += vecs[i][j] * vecs[k][j];
            for (int j = 0; j < vec_len; ++j) vecs[i][j] -= proj * vecs[k][j];
        }
        double nrm = 0.0;
        for (double x : vecs[i]) nrm += x * x;
        nrm = std::sqrt(nrm);
        if (nrm < 1e-12) { // astronomically unlikely; fall back to a unit axis
            std::fill(vecs[i].begin(), vecs[i].end(), 0.0);
            vecs[i][i % vec_len] = 1.0;
            nrm = 1.0;
        }
        for (double& x : vecs[i]) x /= nrm;
    }
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) w[static_cast<std::size_t>(r) * cols + c] = gain * (wide ? vecs[r][c] : vecs[c][r]);
}

} // namespace

PolicyParams PolicyParams::init(const MlpDims& dims, Rng& rng) {
    PolicyParams p;
    p.dims = dims;
    p.theta.assign(dims.total(), 0.0);
    p.norm = ObsNorm(dims.obs);
    const double root2 = std::sqrt(2.0);
    orthogonal_init(p.theta.data() + dims.w1_off(), dims.h1, dims.obs, root2, rng);
    orthogonal_init(p.theta.data() + dims.w2_off(), dims.h2, dims.h1, root2, rng);
    orthogonal_init(p.theta.data() + dims.wp_off(), dims.actions, dims.h2, 0.01, rng);
    orthogonal_init(p.theta.data() + dims.wv_off(), 1, dims.h2, 1.0, rng);
    return p;
}

bool PolicyParams::finite() const {
    for (double v : theta)
        if (!std::isfinite(v)) return false;
    return true;
}

void policy_forward(const PolicyParams& params, const double* obs_raw, ForwardCache& cache) {
    const MlpDims& d = params.dims;
    for (int j = 0; j < d.obs; ++j)
        if (!std::isfinite(obs_raw[j])) throw std::invalid_argument("non-finite observation");

    cache.x.resize(d.obs);
    cache.h1.resize(d.h1);
    cache.h2.resize(d.h2);
    cache.logits.resize(d.actions);
    params.norm.normalize(obs_raw, cache.x.data(), d.obs);

    const double* th = params.theta.data();
    const double* w1 = th + d.w1_off();
    const double* b1 = th + d.b1_off();
    for (int r = 0; r < d.h1; ++r) {
        double acc = b1[r];
        const double* row = w1 + static_cast<std::size_t>(r) * d.obs;
        for (int c = 0; c < d.obs; ++c) acc += row[c] * cache.x[c];
        cache.h1[r] = std::tanh(acc);
    }
    const double* w2 = th + d.w2_off();
    const double* b2 = th + d.b2_off();
    for (int r = 0; r < d.h2; ++r) {
        double acc = b2[r];
        const double* row = w2 + static_cast<std::size_t>(r) * d.h1;
        for (int c = 0; c < d.h1; ++c) acc += row[c] * cache.h1[c];
        cache.h2[r] = std::tanh(acc);
    }
    const double* wp = th + d.wp_off();
    const double* bp = th + d.bp_off();
    for (int r = 0; r < d.actions; ++r) {
        double acc = bp[r];
        const double* row = wp + static_cast<std::size_t>(r) * d.h2;
        for (int c = 0; c < d.h2; ++c) acc += row[c] * cache.h2[c];
        cache.logits[r] = acc;
    }
    const double* wv = th + d.wv_off();
    double acc = th[d.bv_off()];
    for (int c = 0; c < d.h2; ++c) acc += wv[c] * cache.h2[c];
    cache.value = acc;
}

void policy_backward(const PolicyParams& params, const ForwardCache& cache, const double* dlogits,
                     double dvalue, std::vector<double>& grad) {
    const MlpDims& d = params.dims;
    if (grad.size() != params.theta.size()) throw std::invalid_argument("gradient buffer size mismatch");
    const double* th = params.theta.data();
    double* g = grad.data();

    thread_local std::vector<double> dh2, dh1;
    dh2.assign(d.h2, 0.0);
    dh1.assign(d.h1, 0.0);

    // heads
    const double* wp = th + d.wp_off();
    double* gwp = g + d.wp_off();
    double* gbp = g + d.bp_off();
    for (int r = 0; r < d.actions; ++r) {
        const double dl = dlogits[r];
        if (dl != 0.0) {
            const double* row = wp + static_cast<std::size_t>(r) * d.h2;
            double* grow = gwp + static_cast<std::size_t>(r) * d.h2;
            for (int c = 0; c < d.h2; ++c) {
                grow[c] += dl * cache.h2[c];
                dh2[c] += dl * row[c];
            }
        }
        gbp[r] += dl;
    }
    const double* wv = th + d.wv_off();
    double* gwv = g + d.wv_off();
    for (int c = 0; c < d.h2; ++c) {
        gwv[c] += dvalue * cache.h2[c];
        dh2[c] += dvalue * wv[c];
    }
    g[d.bv_off()] += dvalue;

    // trunk layer 2
    const double* w2 = th + d.w2_off();
    double* gw2 = g + d.w2_off();
    double* gb2 = g + d.b2_off();
    for (int r = 0; r < d.h2; ++r) {
        const double dpre = dh2[r] * (1.0 - cache.h2[r] * cache.h2[r]);
        if (dpre == 0.0) continue;
        const double* row = w2 + static_cast<std::size_t>(r) * d.h1;
        double* grow = gw2 + static_cast<std::size_t>(r) * d.h1;
        for (int c = 0; c < d.h1; ++c) {
            grow[c] += dpre * cache.h1[c];
            dh1[c] += dpre * row[c];
        }
        gb2[r] += dpre;
    }

    // trunk layer 1
    double* gw1 = g + d.w1_off();
    double* gb1 = g + d.b1_off();
    for (int r = 0; r < d.h1; ++r) {
        const double dpre = dh1[r] * (1.0 - cache.h1[r] * cache.h1[r]);
        if (dpre == 0.0) continue;
        double* grow = gw1 + static_cast<std::size_t>(r) * d.obs;
        for (int c = 0; c < d.obs; ++c) grow[c] += dpre * cache.x[c];
        gb1[r] += dpre;
    }
}

void log_softmax(const std::vector<double>& logits, std::vector<double>& out) {
    out.resize(logits.size());
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double l : logits) sum += std::exp(l - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
}

double entropy_from_log_probs(const std::vector<double>& logp) {
    double h = 0.0;
    for (double lp : logp) h -= std::exp(lp) * lp;
    return h;
}

int argmax_action(const std::vector<double>& logits) {
    int best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i)
        if (logits[i] > logits[best]) best = static_cast<int>(i);
    return best;
}

int sample_action(const std::vector<double>& logits, Rng& rng, double* logp_out) {
    thread_local std::vector<double> logp;
    log_softmax(logits, logp);
    const double u = rng.uniform();
    double acc = 0.0;
    int action = static_cast<int>(logits.size()) - 1;
    for (std::size_t i = 0; i < logp.size(); ++i) {
        acc += std::exp(logp[i]);
        if (u < acc) {
            action = static_cast<int>(i);
            break;
        }
    }
    if (logp_out) *logp_out = logp[action];
    return action;
}

void AdamState::ensure_size(std::size_t n) {
    if (m.size() != n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
        t = 0;
    }
}

void AdamState::step(std::vector<double>& theta, const std::vector<double>& grad, double lr) {
    ensure_size(theta.size());
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < theta.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        theta[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
}

} // namespace tubenav
