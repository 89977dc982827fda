#ifndef TUNET_ADAM_HPP
#define TUNET_ADAM_HPP

#include "tunet/layers.hpp"

#include <cmath>
#include <vector>

namespace tunet {

/// Adam with decoupled-from-bias L2: the penalty gradient lambda*w is added
/// only to blocks flagged `decay` (conv kernels), never to biases.
struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double l2 = 1e-5;
};

template <typename Scalar>
struct AdamState {
    AdamConfig cfg;
    long t = 0;

    void step(const std::vector<ParamBlock<Scalar>*>& blocks) {
        ++t;
        const Scalar b1 = Scalar(cfg.beta1), b2 = Scalar(cfg.beta2);
        const Scalar bc1 = Scalar(1.0 - std::pow(cfg.beta1, double(t)));
        const Scalar bc2 = Scalar(1.0 - std::pow(cfg.beta2, double(t)));
        const Scalar lr = Scalar(cfg.lr), eps = Scalar(cfg.eps), l2 = Scalar(cfg.l2);
        for (ParamBlock<Scalar>* p : blocks) {
            ArrayX<Scalar> g = p->grad;
            if (p->decay && cfg.l2 != 0.0) g += l2 * p->value;
            p->m = b1 * p->m + (Scalar(1) - b1) * g;
            p->v = b2 * p->v + (Scalar(1) - b2) * g.square();
            p->value -= lr * (p->m / bc1) / ((p->v / bc2).sqrt() + eps);
        }
    }
};

}  // namespace tunet

#endif
