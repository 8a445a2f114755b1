#include "dtnet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dtnet {

namespace {

void check_shapes(const Tensor& p, const Tensor& t, const char* what) {
    if (!p.same_shape(t))
        throw std::invalid_argument(std::string(what) + ": shape mismatch " + p.shape_str() +
                                    " vs " + t.shape_str());
}

inline Real clamp_prob(Real p) { return std::clamp(p, kProbEps, 1.0 - kProbEps); }

}  // namespace

Real bce_value(const Tensor& p, const Tensor& t) {
    check_shapes(p, t, "bce_loss");
    Real acc = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        const Real pc = clamp_prob(p.v[i]);
        acc += -t.v[i] * std::log(pc) - (1.0 - t.v[i]) * std::log(1.0 - pc);
    }
    return acc / Real(p.size());
}

Real iou_value(const Tensor& p, const Tensor& t, Real stabilizer, bool log_form) {
    check_shapes(p, t, "iou_loss");
    Real inter = 0.0, sum_t = 0.0, sum_p = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        inter += t.v[i] * p.v[i];
        sum_t += t.v[i];
        sum_p += p.v[i];
    }
    const Real jac = (inter + stabilizer) / (sum_t + sum_p - inter + stabilizer);
    return log_form ? -std::log(jac) : 1.0 - jac;
}

Real focal_value(const Tensor& p, const Tensor& t, Real lambda, Real gamma) {
    check_shapes(p, t, "focal_loss");
    Real acc = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        const Real pc = clamp_prob(p.v[i]);
        const Real pos_mod = gamma == 0.0 ? 1.0 : std::pow(1.0 - pc, gamma);
        const Real neg_mod = gamma == 0.0 ? 1.0 : std::pow(pc, gamma);
        acc += -lambda * pos_mod * t.v[i] * std::log(pc) -
               (1.0 - lambda) * neg_mod * (1.0 - t.v[i]) * std::log(1.0 - pc);
    }
    return acc / Real(p.size());
}

Real hybrid_value(const std::vector<LossItem>& batch, const LossParams& params) {
    if (batch.empty()) throw std::invalid_argument("hybrid_loss: empty batch");
    Real acc = 0.0;
    for (const LossItem& it : batch) {
        Real L = params.a1 * bce_value(*it.p, *it.t) +
                 params.a2 * iou_value(*it.p, *it.t, params.stabilizer, params.iou_log_form);
        if (it.p_edge && it.t_edge)
            L += params.a3 * focal_value(*it.p_edge, *it.t_edge, params.lambda, params.gamma);
        acc += L;
    }
    return acc / Real(batch.size());
}

Graph::Val bce_op(Graph& g, Graph::Val pv, const Tensor& t) {
    const Tensor& p = g.value(pv);
    check_shapes(p, t, "bce_loss");
    Tensor out(1, 1, 1);
    out.v[0] = bce_value(p, t);
    Graph::Val res = g.make_node(std::move(out), nullptr);
    Tensor target = t;
    g.install_backprop(res, [pv, res, target](Graph& gg) {
        Tensor& dp = gg.grad_ref(pv);
        if (dp.size() == 0) return;
        const Tensor& p = gg.value(pv);
        const Real dy = gg.grad(res).v[0] / Real(p.size());
        for (size_t i = 0; i < p.size(); ++i) {
            if (p.v[i] <= kProbEps || p.v[i] >= 1.0 - kProbEps) continue;  // clamped: flat
            dp.v[i] += dy * (-target.v[i] / p.v[i] + (1.0 - target.v[i]) / (1.0 - p.v[i]));
        }
    });
    return res;
}

Graph::Val iou_op(Graph& g, Graph::Val pv, const Tensor& t, Real stabilizer, bool log_form) {
    const Tensor& p = g.value(pv);
    check_shapes(p, t, "iou_loss");
    Real inter = 0.0, sum_t = 0.0, sum_p = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        inter += t.v[i] * p.v[i];
        sum_t += t.v[i];
        sum_p += p.v[i];
    }
    const Real num = inter + stabilizer;
    const Real den = sum_t + sum_p - inter + stabilizer;
    const Real jac = num / den;
    Tensor out(1, 1, 1);
    out.v[0] = log_form ? -std::log(jac) : 1.0 - jac;
    Graph::Val res = g.make_node(std::move(out), nullptr);
    Tensor target = t;
    g.install_backprop(res, [pv, res, target, num, den, jac, log_form](Graph& gg) {
        Tensor& dp = gg.grad_ref(pv);
        if (dp.size() == 0) return;
        const Real dy = gg.grad(res).v[0];
        // dJ/dp_i = (t_i * den - num * (1 - t_i)) / den^2
        const Real coeff = log_form ? -dy / jac : -dy;
        for (size_t i = 0; i < dp.size(); ++i) {
            const Real dj = (target.v[i] * den - num * (1.0 - target.v[i])) / (den * den);
            dp.v[i] += coeff * dj;
        }
    });
    return res;
}

Graph::Val focal_op(Graph& g, Graph::Val pv, const Tensor& t, Real lambda, Real gamma) {
    const Tensor& p = g.value(pv);
    check_shapes(p, t, "focal_loss");
    Tensor out(1, 1, 1);
    out.v[0] = focal_value(p, t, lambda, gamma);
    Graph::Val res = g.make_node(std::move(out), nullptr);
    Tensor target = t;
    g.install_backprop(res, [pv, res, target, lambda, gamma](Graph& gg) {
        Tensor& dp = gg.grad_ref(pv);
        if (dp.size() == 0) return;
        const Tensor& p = gg.value(pv);
        const Real dy = gg.grad(res).v[0] / Real(p.size());
        for (size_t i = 0; i < p.size(); ++i) {
            const Real raw = p.v[i];
            if (raw <= kProbEps || raw >= 1.0 - kProbEps) continue;
            const Real pc = raw;
            Real d;
            if (target.v[i] > 0.5) {
                const Real mod = gamma == 0.0 ? 1.0 : std::pow(1.0 - pc, gamma);
                const Real dmod = gamma == 0.0 ? 0.0 : -gamma * std::pow(1.0 - pc, gamma - 1.0);
                d = -lambda * (dmod * std::log(pc) + mod / pc);
            } else {
                const Real mod = gamma == 0.0 ? 1.0 : std::pow(pc, gamma);
                const Real dmod = gamma == 0.0 ? 0.0 : gamma * std::pow(pc, gamma - 1.0);
                d = -(1.0 - lambda) * (dmod * std::log(1.0 - pc) - mod / (1.0 - pc));
            }
            dp.v[i] += dy * d;
        }
    });
    return res;
}

Graph::Val sample_loss_op(Graph& g, Graph::Val p, const Tensor& t, Graph::Val p_edge,
                          const Tensor* t_edge, const LossParams& params) {
    std::vector<std::pair<Real, Graph::Val>> terms;
    terms.emplace_back(params.a1, bce_op(g, p, t));
    terms.emplace_back(params.a2, iou_op(g, p, t, params.stabilizer, params.iou_log_form));
    if (t_edge)
        terms.emplace_back(params.a3, focal_op(g, p_edge, *t_edge, params.lambda, params.gamma));
    return g.weighted_sum(terms);
}

}  // namespace dtnet
