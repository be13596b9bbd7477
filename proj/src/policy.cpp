#include "sde/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sde {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178; // 0.5 * log(2*pi)
}

GaussianPolicy::GaussianPolicy(int input_dim, int hidden_dim, int output_dim, std::uint64_t seed,
                               double logstd_init)
    : in_(input_dim), hidden_(hidden_dim), out_(output_dim) {
    w1_ = 0;
    b1_ = w1_ + hidden_ * in_;
    w2_ = b1_ + hidden_;
    b2_ = w2_ + hidden_ * hidden_;
    wm_ = b2_ + hidden_;
    bm_ = wm_ + out_ * hidden_;
    wv_ = bm_ + out_;
    bv_ = wv_ + hidden_;
    ls_ = bv_ + 1;
    params_.assign(ls_ + out_, 0.0);

    Rng rng(derive_seed(seed, 0x901c1u));
    auto xavier = [&rng](double* w, int rows, int cols, double scale) {
        const double s = scale * std::sqrt(6.0 / (rows + cols));
        for (int i = 0; i < rows * cols; ++i) w[i] = rng.uniform(-s, s);
    };
    xavier(&params_[w1_], hidden_, in_, 1.0);
    xavier(&params_[w2_], hidden_, hidden_, 1.0);
    xavier(&params_[wm_], out_, hidden_, 0.01); // small initial actions
    xavier(&params_[wv_], 1, hidden_, 1.0);
    for (int i = 0; i < out_; ++i) params_[ls_ + i] = logstd_init;
}

GaussianPolicy::Forward GaussianPolicy::forward(const std::vector<double>& input) const {
    if (static_cast<int>(input.size()) != in_)
        throw std::invalid_argument("GaussianPolicy::forward: input size mismatch");
    Forward f;
    f.input = input;
    f.a1.resize(hidden_);
    for (int i = 0; i < hidden_; ++i) {
        double s = params_[b1_ + i];
        const double* w = &params_[w1_ + i * in_];
        for (int j = 0; j < in_; ++j) s += w[j] * input[j];
        f.a1[i] = std::tanh(s);
    }
    f.a2.resize(hidden_);
    for (int i = 0; i < hidden_; ++i) {
        double s = params_[b2_ + i];
        const double* w = &params_[w2_ + i * hidden_];
        for (int j = 0; j < hidden_; ++j) s += w[j] * f.a1[j];
        f.a2[i] = std::tanh(s);
    }
    f.mean.resize(out_);
    for (int o = 0; o < out_; ++o) {
        double s = params_[bm_ + o];
        const double* w = &params_[wm_ + o * hidden_];
        for (int j = 0; j < hidden_; ++j) s += w[j] * f.a2[j];
        f.mean[o] = s;
    }
    {
        double s = params_[bv_];
        const double* w = &params_[wv_];
        for (int j = 0; j < hidden_; ++j) s += w[j] * f.a2[j];
        f.value = s;
    }
    f.logstd.resize(out_);
    for (int o = 0; o < out_; ++o)
        f.logstd[o] = std::clamp(params_[ls_ + o], kLogStdMin, kLogStdMax);
    return f;
}

void GaussianPolicy::backward(const Forward& f, const std::vector<double>& dmean,
                              const std::vector<double>& dlogstd, double dvalue,
                              std::vector<double>& grad) const {
    if (static_cast<int>(grad.size()) < param_count())
        throw std::invalid_argument("GaussianPolicy::backward: grad buffer too small");

    std::vector<double> da2(hidden_, 0.0);
    for (int o = 0; o < out_; ++o) {
        const double g = dmean[o];
        if (g != 0.0) {
            double* wg = &grad[wm_ + o * hidden_];
            const double* w = &params_[wm_ + o * hidden_];
            for (int j = 0; j < hidden_; ++j) {
                wg[j] += g * f.a2[j];
                da2[j] += g * w[j];
            }
            grad[bm_ + o] += g;
        }
    }
    if (dvalue != 0.0) {
        double* wg = &grad[wv_];
        const double* w = &params_[wv_];
        for (int j = 0; j < hidden_; ++j) {
            wg[j] += dvalue * f.a2[j];
            da2[j] += dvalue * w[j];
        }
        grad[bv_] += dvalue;
    }

    std::vector<double> da1(hidden_, 0.0);
    for (int i = 0; i < hidden_; ++i) {
        const double dpre = da2[i] * (1.0 - f.a2[i] * f.a2[i]);
        if (dpre == 0.0) continue;
        double* wg = &grad[w2_ + i * hidden_];
        const double* w = &params_[w2_ + i * hidden_];
        for (int j = 0; j < hidden_; ++j) {
            wg[j] += dpre * f.a1[j];
            da1[j] += dpre * w[j];
        }
        grad[b2_ + i] += dpre;
    }
    for (int i = 0; i < hidden_; ++i) {
        const double dpre = da1[i] * (1.0 - f.a1[i] * f.a1[i]);
        if (dpre == 0.0) continue;
        double* wg = &grad[w1_ + i * in_];
        for (int j = 0; j < in_; ++j) wg[j] += dpre * f.input[j];
        grad[b1_ + i] += dpre;
    }

    for (int o = 0; o < out_; ++o) {
        // gradient blocked where the clamp is active
        const double raw = params_[ls_ + o];
        if (raw > kLogStdMin && raw < kLogStdMax) grad[ls_ + o] += dlogstd[o];
    }
}

std::vector<double> GaussianPolicy::sample(const Forward& f, Rng& rng) const {
    std::vector<double> x(out_);
    for (int o = 0; o < out_; ++o) x[o] = f.mean[o] + std::exp(f.logstd[o]) * rng.normal();
    return x;
}

double GaussianPolicy::log_prob(const std::vector<double>& mean,
                                const std::vector<double>& logstd,
                                const std::vector<double>& x) {
    double lp = 0.0;
    for (size_t i = 0; i < mean.size(); ++i) {
        const double z = (x[i] - mean[i]) * std::exp(-logstd[i]);
        lp += -0.5 * z * z - logstd[i] - kHalfLog2Pi;
    }
    return lp;
}

void GaussianPolicy::log_prob_grad(const std::vector<double>& mean,
                                   const std::vector<double>& logstd,
                                   const std::vector<double>& x, std::vector<double>& dmean,
                                   std::vector<double>& dlogstd) {
    dmean.resize(mean.size());
    dlogstd.resize(mean.size());
    for (size_t i = 0; i < mean.size(); ++i) {
        const double inv_var = std::exp(-2.0 * logstd[i]);
        const double diff = x[i] - mean[i];
        dmean[i] = diff * inv_var;
        dlogstd[i] = diff * diff * inv_var - 1.0;
    }
}

double GaussianPolicy::entropy(const std::vector<double>& logstd) {
    double h = 0.0;
    for (double ls : logstd) h += ls + 0.5 + kHalfLog2Pi;
    return h;
}

void Adam::step(std::vector<double>& params, const std::vector<double>& grad) {
    if (params.size() != m.size() || grad.size() != m.size())
        throw std::invalid_argument("Adam::step: size mismatch");
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (size_t i = 0; i < params.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
}

double log1m_tanh_sq(double x) {
    const double ax = std::fabs(x);
    return 2.0 * (std::log(2.0) - ax - std::log1p(std::exp(-2.0 * ax)));
}

double squashed_log_prob_symmetric(const std::vector<double>& mean,
                                   const std::vector<double>& logstd,
                                   const std::vector<double>& x_raw, double range) {
    double lp = GaussianPolicy::log_prob(mean, logstd, x_raw);
    for (double x : x_raw) lp -= std::log(range) + log1m_tanh_sq(x);
    return lp;
}

double squashed_log_prob_unit(const std::vector<double>& mean, const std::vector<double>& logstd,
                              const std::vector<double>& x_raw) {
    double lp = GaussianPolicy::log_prob(mean, logstd, x_raw);
    for (double x : x_raw) lp -= std::log(0.5) + log1m_tanh_sq(x);
    return lp;
}

}  // namespace sde
