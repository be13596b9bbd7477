#pragma once

#include <cstdint>
#include <vector>

#include "sde/rng.hpp"

namespace sde {

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

// Two tanh hidden layers, a linear mean head, a linear value head sharing the
// trunk, and a state-independent log-std vector. Parameters live in one flat
// vector so optimization, checkpointing and finite-difference checks all see
// the same layout.
class GaussianPolicy {
public:
    GaussianPolicy(int input_dim, int hidden_dim, int output_dim, std::uint64_t seed,
                   double logstd_init = -0.5);

    int input_dim() const { return in_; }
    int output_dim() const { return out_; }
    int hidden_dim() const { return hidden_; }
    int param_count() const { return static_cast<int>(params_.size()); }
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }

    struct Forward {
        std::vector<double> mean;
        std::vector<double> logstd; // clamped
        double value = 0.0;
        // caches for the backward pass
        std::vector<double> input, a1, a2;
    };

    Forward forward(const std::vector<double>& input) const;

    // Accumulate d(loss)/d(params) into grad given output-side gradients.
    void backward(const Forward& f, const std::vector<double>& dmean,
                  const std::vector<double>& dlogstd, double dvalue,
                  std::vector<double>& grad) const;

    // Diagonal Gaussian sample of the raw (pre-squash) action.
    std::vector<double> sample(const Forward& f, Rng& rng) const;

    static double log_prob(const std::vector<double>& mean, const std::vector<double>& logstd,
                           const std::vector<double>& x);
    // d(logp)/d(mean) and d(logp)/d(logstd) at x.
    static void log_prob_grad(const std::vector<double>& mean, const std::vector<double>& logstd,
                              const std::vector<double>& x, std::vector<double>& dmean,
                              std::vector<double>& dlogstd);
    static double entropy(const std::vector<double>& logstd);

private:
    int in_, hidden_, out_;
    std::vector<double> params_;
    // flat layout offsets
    int w1_, b1_, w2_, b2_, wm_, bm_, wv_, bv_, ls_;
};

struct Adam {
    double lr = 3e-4;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::vector<double> m, v;
    long t = 0;

    explicit Adam(int n, double learning_rate) : lr(learning_rate), m(n, 0.0), v(n, 0.0) {}
    void step(std::vector<double>& params, const std::vector<double>& grad);
};

// log(1 - tanh(x)^2), stable for large |x|.
double log1m_tanh_sq(double x);

// Squash helpers shared by the design ([-range, range]) and control ([0, 1]) heads.
inline double squash_symmetric(double x, double range) { return range * std::tanh(x); }
inline double squash_unit(double x) { return 0.5 * (1.0 + std::tanh(x)); }

// Log-density of the squashed variable (Gaussian log-prob plus the
// change-of-variables correction).
double squashed_log_prob_symmetric(const std::vector<double>& mean,
                                   const std::vector<double>& logstd,
                                   const std::vector<double>& x_raw, double range);
double squashed_log_prob_unit(const std::vector<double>& mean, const std::vector<double>& logstd,
                              const std::vector<double>& x_raw);

}  // namespace sde
