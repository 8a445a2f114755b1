#pragma once

#include <deque>
#include <functional>
#include <utility>
#include <vector>

#include "dtnet/params.hpp"
#include "dtnet/tensor.hpp"

namespace dtnet {

// Reverse-mode tape over Tensor values. One Graph instance records one
// forward pass; backward() replays the tape in reverse. Parameters live
// outside the tape (in a ParamStore); ops that consume them accumulate
// directly into Param::grad.
//
// In non-recording mode no backprop closures are built and no gradient
// buffers are allocated, so eval-mode forwards stay cheap.
class Graph {
public:
    using Val = int;

    explicit Graph(bool record = true, bool training = false)
        : record_(record), training_(training) {}

    Val input(Tensor value, bool needs_grad = false);

    // Generic node factory for fused ops defined in other modules.
    // `back` receives this graph and may read value(...)/grad(...) and
    // write grad_ref(...). Null back = leaf.
    Val make_node(Tensor value, std::function<void(Graph&)> back);
    // Attach the backprop closure once the node's own index is known
    // (no-op on non-recording graphs).
    void install_backprop(Val v, std::function<void(Graph&)> back) {
        if (record_) nodes_[size_t(v)].back = std::move(back);
    }

    const Tensor& value(Val v) const { return nodes_[size_t(v)].value; }
    const Tensor& grad(Val v) const { return nodes_[size_t(v)].grad; }
    Tensor& grad_ref(Val v) { return nodes_[size_t(v)].grad; }

    // --- core ops ---
    // "Same"-padded convolution; kernel geometry comes from w.dims = {k,k,cin,cout}.
    // Output is ceil(H/stride) x ceil(W/stride) x cout.
    Val conv(Val x, Param& w, Param& b, int stride = 1);
    Val relu(Val x);
    Val sigmoid(Val x);
    Val add(Val a, Val b);
    Val mul(Val a, Val b);
    // x: HxWxC times m: HxWx1, mask broadcast over channels.
    Val mul_mask(Val x, Val m);
    Val affine(Val x, Real mul, Real add);
    Val concat(Val a, Val b);  // channel concat
    Val upsample2x(Val x);     // bilinear, half-pixel centers, clamped borders
    // Per-channel normalization over spatial positions with affine params.
    // Training mode uses batch statistics and updates the running ones;
    // eval mode normalizes with the running statistics.
    Val channel_norm(Val x, Param& gamma, Param& beta, Param& run_mean, Param& run_var);
    // Scalar (1x1x1) combination: sum_k coeff_k * term_k.
    Val weighted_sum(const std::vector<std::pair<Real, Val>>& terms);
    // Reduce all entries to a 1x1x1 scalar.
    Val sum(Val x);

    // Seeds d(loss)/d(loss) = seed and walks the tape backwards.
    void backward(Val scalar_loss, Real seed = 1.0);

    bool recording() const { return record_; }
    bool training() const { return training_; }

    // Smallest distance from any nondifferentiable point seen in this
    // forward (rectifier pre-activations, argmax gaps). Finite-difference
    // checks re-draw inputs when this falls under their margin.
    Real kink_margin() const { return kink_margin_; }
    void track_margin(Real m) {
        if (m < kink_margin_) kink_margin_ = m;
    }

    static constexpr Real kNormEps = 1e-5;
    static constexpr Real kNormMomentum = 0.1;

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void(Graph&)> back;
    };
    std::deque<Node> nodes_;
    bool record_;
    bool training_;
    Real kink_margin_ = 1e30;
};

}  // namespace dtnet
