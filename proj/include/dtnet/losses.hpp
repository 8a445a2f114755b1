#pragma once

#include <vector>

#include "dtnet/graph.hpp"

namespace dtnet {

// Weights and constants of the hybrid objective: area cross-entropy +
// area soft-Jaccard + edge focal, batch-averaged.
struct LossParams {
    Real a1 = 1.0;
    Real a2 = 1.0;
    Real a3 = 1.0;
    Real lambda = 0.75;      // focal positive/negative balance
    Real gamma = 2.0;        // focal focusing exponent
    Real stabilizer = 1e-6;  // soft-Jaccard overflow guard
    bool iou_log_form = false;  // minimize -ln(J) instead of 1-J
};

// Probabilities are clamped to [kProbEps, 1-kProbEps] before logarithms.
constexpr Real kProbEps = 1e-7;

Real bce_value(const Tensor& p, const Tensor& t);
Real iou_value(const Tensor& p, const Tensor& t, Real stabilizer, bool log_form = false);
Real focal_value(const Tensor& p, const Tensor& t, Real lambda, Real gamma);

// One batch element; p_edge/t_edge are null in single-task mode.
struct LossItem {
    const Tensor* p = nullptr;
    const Tensor* p_edge = nullptr;
    const Tensor* t = nullptr;
    const Tensor* t_edge = nullptr;
};

Real hybrid_value(const std::vector<LossItem>& batch, const LossParams& params);

// Autodiff counterparts; forward values equal the pure evaluators.
Graph::Val bce_op(Graph& g, Graph::Val p, const Tensor& t);
Graph::Val iou_op(Graph& g, Graph::Val p, const Tensor& t, Real stabilizer,
                  bool log_form = false);
Graph::Val focal_op(Graph& g, Graph::Val p, const Tensor& t, Real lambda, Real gamma);

// Per-sample combined objective (batch averaging is the trainer's job).
Graph::Val sample_loss_op(Graph& g, Graph::Val p, const Tensor& t, Graph::Val p_edge,
                          const Tensor* t_edge, const LossParams& params);

}  // namespace dtnet
