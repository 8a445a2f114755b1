#include "dtnet/graph.hpp"

#include <cblas.h>

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace dtnet {

namespace {
// The GEMMs behind these convolutions are too small for OpenBLAS's
// threading heuristics; its thread pool roughly halves throughput here.
struct BlasThreadPin {
    BlasThreadPin() { openblas_set_num_threads(1); }
};
const BlasThreadPin blas_pin;
}  // namespace

Graph::Val Graph::input(Tensor value, bool needs_grad) {
    Node n;
    n.value = std::move(value);
    if (record_ && needs_grad) n.grad = Tensor(n.value.h, n.value.w, n.value.c);
    nodes_.push_back(std::move(n));
    return Val(nodes_.size() - 1);
}

Graph::Val Graph::make_node(Tensor value, std::function<void(Graph&)> back) {
    Node n;
    n.value = std::move(value);
    if (record_) {
        n.grad = Tensor(n.value.h, n.value.w, n.value.c);
        n.back = std::move(back);
    }
    nodes_.push_back(std::move(n));
    return Val(nodes_.size() - 1);
}

void Graph::backward(Val scalar_loss, Real seed) {
    if (!record_) throw std::logic_error("backward on non-recording graph");
    Node& loss = nodes_[size_t(scalar_loss)];
    if (loss.value.size() != 1) throw std::invalid_argument("backward: loss must be scalar");
    loss.grad.v[0] += seed;
    for (size_t i = scalar_loss + 1; i-- > 0;) {
        if (nodes_[i].back) nodes_[i].back(*this);
    }
}

// ---------------------------------------------------------------------------
// convolution (im2col + dgemm)

namespace {

// col is (outH*outW) x (k*k*cin), row-major; patch channels contiguous.
void im2col(const Tensor& x, int k, int stride, int pad, int out_h, int out_w, Real* col) {
    const int cin = x.c;
    const int patch = k * k * cin;
    for (int oy = 0; oy < out_h; ++oy) {
        for (int ox = 0; ox < out_w; ++ox) {
            Real* dst = col + (size_t(oy) * out_w + ox) * patch;
            for (int ky = 0; ky < k; ++ky) {
                const int iy = oy * stride + ky - pad;
                for (int kx = 0; kx < k; ++kx) {
                    const int ix = ox * stride + kx - pad;
                    Real* d = dst + (ky * k + kx) * cin;
                    if (iy >= 0 && iy < x.h && ix >= 0 && ix < x.w) {
                        std::memcpy(d, x.row(iy, ix), sizeof(Real) * cin);
                    } else {
                        std::memset(d, 0, sizeof(Real) * cin);
                    }
                }
            }
        }
    }
}

void col2im_add(const Real* col, int k, int stride, int pad, int out_h, int out_w, Tensor& dx) {
    const int cin = dx.c;
    const int patch = k * k * cin;
    for (int oy = 0; oy < out_h; ++oy) {
        for (int ox = 0; ox < out_w; ++ox) {
            const Real* src = col + (size_t(oy) * out_w + ox) * patch;
            for (int ky = 0; ky < k; ++ky) {
                const int iy = oy * stride + ky - pad;
                if (iy < 0 || iy >= dx.h) continue;
                for (int kx = 0; kx < k; ++kx) {
                    const int ix = ox * stride + kx - pad;
                    if (ix < 0 || ix >= dx.w) continue;
                    const Real* s = src + (ky * k + kx) * cin;
                    Real* d = dx.row(iy, ix);
                    for (int ci = 0; ci < cin; ++ci) d[ci] += s[ci];
                }
            }
        }
    }
}

}  // namespace

Graph::Val Graph::conv(Val xv, Param& w, Param& b, int stride) {
    if (w.dims.size() != 4) throw std::invalid_argument("conv: weight dims must be {k,k,cin,cout}");
    const int k = w.dims[0];
    const int cin = w.dims[2];
    const int cout = w.dims[3];
    const Tensor& x = value(xv);
    if (x.c != cin)
        throw std::invalid_argument("conv " + w.name + ": input has " + std::to_string(x.c) +
                                    " channels, expected " + std::to_string(cin));
    const int pad = (k - 1) / 2;
    const int out_h = (x.h + stride - 1) / stride;
    const int out_w = (x.w + stride - 1) / stride;
    const int n = out_h * out_w;
    const int patch = k * k * cin;

    std::vector<Real> col(size_t(n) * patch);
    im2col(x, k, stride, pad, out_h, out_w, col.data());

    Tensor y(out_h, out_w, cout);
    // y[n][cout] = col[n][patch] * w[patch][cout]
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, n, cout, patch, 1.0, col.data(), patch,
                w.value.data(), cout, 0.0, y.v.data(), cout);
    for (int i = 0; i < n; ++i) {
        Real* r = y.v.data() + size_t(i) * cout;
        for (int co = 0; co < cout; ++co) r[co] += b.value[co];
    }

    Val out = make_node(std::move(y), nullptr);
    if (record_) {
        auto bp = [xv, out, &w, &b, k, stride, pad, out_h, out_w](Graph& g) {
            const Tensor& x = g.value(xv);
            const Tensor& dy = g.grad(out);
            const int cin = x.c;
            const int cout = int(b.value.size());
            const int n = out_h * out_w;
            const int patch = k * k * cin;

            std::vector<Real> col(size_t(n) * patch);
            im2col(x, k, stride, pad, out_h, out_w, col.data());

            // dW += col^T * dY
            cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, patch, cout, n, 1.0, col.data(),
                        patch, dy.v.data(), cout, 1.0, w.grad.data(), cout);
            // db += column sums of dY
            for (int i = 0; i < n; ++i) {
                const Real* r = dy.v.data() + size_t(i) * cout;
                for (int co = 0; co < cout; ++co) b.grad[co] += r[co];
            }
            // dX += col2im(dY * W^T)
            Tensor& dx = g.grad_ref(xv);
            if (dx.size() > 0) {
                std::vector<Real> dcol(size_t(n) * patch);
                cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, n, patch, cout, 1.0,
                            dy.v.data(), cout, w.value.data(), cout, 0.0, dcol.data(), patch);
                col2im_add(dcol.data(), k, stride, pad, out_h, out_w, dx);
            }
        };
        nodes_[size_t(out)].back = std::move(bp);
    }
    return out;
}

// ---------------------------------------------------------------------------
// elementwise ops

Graph::Val Graph::relu(Val xv) {
    const Tensor& x = value(xv);
    Tensor y = x;
    Real margin = 1e30;
    for (Real& e : y.v) {
        margin = std::min(margin, std::fabs(e));
        if (e < 0.0) e = 0.0;
    }
    track_margin(margin);
    Val out = make_node(std::move(y), nullptr);
    if (record_) {
        nodes_[size_t(out)].back = [xv, out](Graph& g) {
            Tensor& dx = g.grad_ref(xv);
            if (dx.size() == 0) return;
            const Tensor& x = g.value(xv);
            const Tensor& dy = g.grad(out);
            for (size_t i = 0; i < x.size(); ++i)
                if (x.v[i] > 0.0) dx.v[i] += dy.v[i];
        };
    }
    return out;
}

Graph::Val Graph::sigmoid(Val xv) {
    const Tensor& x = value(xv);
    Tensor y = x;
    for (Real& e : y.v) e = 1.0 / (1.0 + std::exp(-e));
    Val out = make_node(std::move(y), nullptr);
    if (record_) {
        nodes_[size_t(out)].back = [xv, out](Graph& g) {
            Tensor& dx = g.grad_ref(xv);
            if (dx.size() == 0) return;
            const Tensor& y = g.value(out);
            const Tensor& dy = g.grad(out);
            for (size_t i = 0; i < y.size(); ++i) dx.v[i] += dy.v[i] * y.v[i] * (1.0 - y.v[i]);
        };
    }
    return out;
}

Graph::Val Graph::add(Val av, Val bv) {
    const Tensor& a = value(av);
    const Tensor& b = value(bv);
    if (!a.same_shape(b))
        throw std::invalid_argument("add: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    Tensor y = a;
    for (size_t i = 0; i < y.size(); ++i) y.v[i] += b.v[i];
    Val out = make_node(std::move(y), nullptr);
    if (record_) {
        nodes_[size_t(out)].back = [av, bv, out](Graph& g) {
            const Tensor& dy = g.grad(out);
            for (Val src : {av, bv}) {
                Tensor& d = g.grad_ref(src);
                if (d.size() == 0) continue;
                for (size_t i = 0; i < dy.size(); ++i) d.v[i] += dy.v[i];
            }
        };
    }
    return out;
}

Graph::Val Graph::mul(Val av, Val bv) {
    const Tensor& a = value(av);
    const Tensor& b = value(bv);
    if (!a.same_shape(b))
        throw std::invalid_argument("mul: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    Tensor y = a;
    for (size_t i = 0; i < y.size(); ++i) y.v[i] *= b.v[i];
    Val out = make_node(std::move(y), nullptr);
    if (record_) {
        nodes_[size_t(out)].back = [av, bv, out](Graph& g) {
            const Tensor& dy = g.grad(out);
            const Tensor& a = g.value(av);
            const Tensor& b = g.value(bv);
            Tensor& da = g.grad_ref(av);
            Tensor& db = g.grad_ref(bv);
            if (da.size())
                for (size_t i = 0; i < dy.size(); ++i) da.v[i] += dy.v[i] * b.v[i];
            if (db.size())
                for (size_t i = 0; i < dy.size(); ++i) db.v[i] += dy.v[i] * a.v[i];
        };
    }
    return out;
}

Graph::Val Graph::mul_mask(Val xv, Val mv) {
    const Tensor& x = value(xv);
    const Tensor& m = value(mv);
    if (m.c != 1 || m.h != x.h || m.w != x.w)
        throw std::invalid_argument("mul_mask: mask must be HxWx1 matching x");
    Tensor y = x;
    for (int p = 0; p < x.h * x.w; ++p) {
        const Real mk = m.v[size_t(p)];
        Real* r = y.v.data() + size_t(p) * x.c;
        for (int ci = 0; ci < x.c; ++ci) r[ci] *= mk;
    }
    Val out = make_node(std::move(y), nullptr);
    if (record_) {
        nodes_[size_t(out)].back = [xv, mv, out](Graph& g) {
            const Tensor& dy = g.grad(out);
            const Tensor& x = g.value(xv);
            const Tensor& m = g.value(mv);
            Tensor& dx = g.grad_ref(xv);
            Tensor& dm = g.grad_ref(mv);
            const int c = x.c;
            for (int p = 0; p < x.h * x.w; ++p) {
                const Real* dyr = dy.v.data() + size_t(p) * c;
                if (dx.size()) {
                    Real* dxr = dx.v.data() + size_t(p) * c;
                    for (int ci = 0; ci < c; ++ci) dxr[ci] += dyr[ci] * m.v[size_t(p)];
                }
                if (dm.size()) {
                    const Real* xr = x.row(p / x.w, p % x.w);
                    Real s = 0.0;
                    for (int ci = 0; ci < c; ++ci) s += dyr[ci] * xr[ci];
                    dm.v[size_t(p)] += s;
                }
            }
        };
    }
    return out;
}

Graph::Val Graph::affine(Val xv, Real mul_c, Real add_c) {
    const Tensor& x = value(xv);
    Tensor y = x;
    for (Real& e : y.v) e = mul_c * e + add_c;
    Val out = make_node(std::move(y), nullptr);
    if (record_) {
        nodes_[size_t(out)].back = [xv, out, mul_c](Graph& g) {
            Tensor& dx = g.grad_ref(xv);
            if (dx.size() == 0) return;
            const Tensor& dy = g.grad(out);
            for (size_t i = 0; i < dy.size(); ++i) dx.v[i] += mul_c * dy.v[i];
        };
    }
    return out;
}

Graph::Val Graph::concat(Val av, Val bv) {
    const Tensor& a = value(av);
    const Tensor& b = value(bv);
    if (a.h != b.h || a.w != b.w)
        throw std::invalid_argument("concat: spatial mismatch " + a.shape_str() + " vs " +
                                    b.shape_str());
    Tensor y(a.h, a.w, a.c + b.c);
    for (int p = 0; p < a.h * a.w; ++p) {
        Real* r = y.v.data() + size_t(p) * y.c;
        std::memcpy(r, a.v.data() + size_t(p) * a.c, sizeof(Real) * a.c);
        std::memcpy(r + a.c, b.v.data() + size_t(p) * b.c, sizeof(Real) * b.c);
    }
    Val out = make_node(std::move(y), nullptr);
    if (record_) {
        nodes_[size_t(out)].back = [av, bv, out](Graph& g) {
            const Tensor& dy = g.grad(out);
            const Tensor& a = g.value(av);
            const Tensor& b = g.value(bv);
            Tensor& da = g.grad_ref(av);
            Tensor& db = g.grad_ref(bv);
            for (int p = 0; p < a.h * a.w; ++p) {
                const Real* r = dy.v.data() + size_t(p) * dy.c;
                if (da.size()) {
                    Real* d = da.v.data() + size_t(p) * a.c;
                    for (int ci = 0; ci < a.c; ++ci) d[ci] += r[ci];
                }
                if (db.size()) {
                    Real* d = db.v.data() + size_t(p) * b.c;
                    for (int ci = 0; ci < b.c; ++ci) d[ci] += r[a.c + ci];
                }
            }
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// bilinear 2x upsample, half-pixel centers, clamped borders

namespace {
struct LerpAxis {
    std::vector<int> i0, i1;
    std::vector<Real> w1;  // weight of i1; weight of i0 is 1 - w1
};

LerpAxis make_axis_2x(int in_n) {
    LerpAxis ax;
    const int out_n = 2 * in_n;
    ax.i0.resize(out_n);
    ax.i1.resize(out_n);
    ax.w1.resize(out_n);
    for (int o = 0; o < out_n; ++o) {
        const Real src = (o + 0.5) / 2.0 - 0.5;
        Real f = std::floor(src);
        int i0 = int(f);
        Real w1 = src - f;
        int i1 = i0 + 1;
        if (i0 < 0) i0 = 0;
        if (i1 > in_n - 1) i1 = in_n - 1;
        if (i0 > in_n - 1) i0 = in_n - 1;
        ax.i0[o] = i0;
        ax.i1[o] = i1;
        ax.w1[o] = w1;
    }
    return ax;
}
}  // namespace

Graph::Val Graph::upsample2x(Val xv) {
    const Tensor& x = value(xv);
    const LerpAxis ay = make_axis_2x(x.h);
    const LerpAxis axx = make_axis_2x(x.w);
    Tensor y(2 * x.h, 2 * x.w, x.c);
    for (int oy = 0; oy < y.h; ++oy) {
        for (int ox = 0; ox < y.w; ++ox) {
            const Real wy1 = ay.w1[oy], wx1 = axx.w1[ox];
            const Real* p00 = x.row(ay.i0[oy], axx.i0[ox]);
            const Real* p01 = x.row(ay.i0[oy], axx.i1[ox]);
            const Real* p10 = x.row(ay.i1[oy], axx.i0[ox]);
            const Real* p11 = x.row(ay.i1[oy], axx.i1[ox]);
            Real* r = y.row(oy, ox);
            for (int ci = 0; ci < x.c; ++ci) {
                const Real top = p00[ci] * (1.0 - wx1) + p01[ci] * wx1;
                const Real bot = p10[ci] * (1.0 - wx1) + p11[ci] * wx1;
                r[ci] = top * (1.0 - wy1) + bot * wy1;
            }
        }
    }
    Val out = make_node(std::move(y), nullptr);
    if (record_) {
        nodes_[size_t(out)].back = [xv, out](Graph& g) {
            Tensor& dx = g.grad_ref(xv);
            if (dx.size() == 0) return;
            const Tensor& x = g.value(xv);
            const Tensor& dy = g.grad(out);
            const LerpAxis ay = make_axis_2x(x.h);
            const LerpAxis axx = make_axis_2x(x.w);
            for (int oy = 0; oy < dy.h; ++oy) {
                for (int ox = 0; ox < dy.w; ++ox) {
                    const Real wy1 = ay.w1[oy], wx1 = axx.w1[ox];
                    const Real* r = dy.row(oy, ox);
                    Real* p00 = dx.row(ay.i0[oy], axx.i0[ox]);
                    Real* p01 = dx.row(ay.i0[oy], axx.i1[ox]);
                    Real* p10 = dx.row(ay.i1[oy], axx.i0[ox]);
                    Real* p11 = dx.row(ay.i1[oy], axx.i1[ox]);
                    for (int ci = 0; ci < x.c; ++ci) {
                        p00[ci] += r[ci] * (1.0 - wy1) * (1.0 - wx1);
                        p01[ci] += r[ci] * (1.0 - wy1) * wx1;
                        p10[ci] += r[ci] * wy1 * (1.0 - wx1);
                        p11[ci] += r[ci] * wy1 * wx1;
                    }
                }
            }
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// per-channel normalization

Graph::Val Graph::channel_norm(Val xv, Param& gamma, Param& beta, Param& run_mean,
                               Param& run_var) {
    const Tensor& x = value(xv);
    const int c = x.c;
    if (int(gamma.value.size()) != c)
        throw std::invalid_argument("channel_norm " + gamma.name + ": channel mismatch");
    const int n = x.h * x.w;
    Tensor y(x.h, x.w, c);

    if (training_) {
        std::vector<Real> mean(c, 0.0), var(c, 0.0), inv_std(c, 0.0);
        for (int p = 0; p < n; ++p) {
            const Real* r = x.v.data() + size_t(p) * c;
            for (int ci = 0; ci < c; ++ci) mean[ci] += r[ci];
        }
        for (int ci = 0; ci < c; ++ci) mean[ci] /= n;
        for (int p = 0; p < n; ++p) {
            const Real* r = x.v.data() + size_t(p) * c;
            for (int ci = 0; ci < c; ++ci) {
                const Real d = r[ci] - mean[ci];
                var[ci] += d * d;
            }
        }
        for (int ci = 0; ci < c; ++ci) {
            var[ci] /= n;
            inv_std[ci] = 1.0 / std::sqrt(var[ci] + kNormEps);
        }
        for (int p = 0; p < n; ++p) {
            const Real* r = x.v.data() + size_t(p) * c;
            Real* o = y.v.data() + size_t(p) * c;
            for (int ci = 0; ci < c; ++ci)
                o[ci] = gamma.value[ci] * (r[ci] - mean[ci]) * inv_std[ci] + beta.value[ci];
        }
        for (int ci = 0; ci < c; ++ci) {
            run_mean.value[ci] = (1.0 - kNormMomentum) * run_mean.value[ci] + kNormMomentum * mean[ci];
            run_var.value[ci] = (1.0 - kNormMomentum) * run_var.value[ci] + kNormMomentum * var[ci];
        }
        Val out = make_node(std::move(y), nullptr);
        if (record_) {
            nodes_[size_t(out)].back = [xv, out, &gamma, &beta, mean, inv_std](Graph& g) {
                const Tensor& x = g.value(xv);
                const Tensor& dy = g.grad(out);
                const int c = x.c;
                const int n = x.h * x.w;
                std::vector<Real> sum_dy(c, 0.0), sum_dy_xhat(c, 0.0);
                for (int p = 0; p < n; ++p) {
                    const Real* dr = dy.v.data() + size_t(p) * c;
                    const Real* xr = x.v.data() + size_t(p) * c;
                    for (int ci = 0; ci < c; ++ci) {
                        const Real xhat = (xr[ci] - mean[ci]) * inv_std[ci];
                        sum_dy[ci] += dr[ci];
                        sum_dy_xhat[ci] += dr[ci] * xhat;
                    }
                }
                for (int ci = 0; ci < c; ++ci) {
                    gamma.grad[ci] += sum_dy_xhat[ci];
                    beta.grad[ci] += sum_dy[ci];
                }
                Tensor& dx = g.grad_ref(xv);
                if (dx.size() == 0) return;
                for (int p = 0; p < n; ++p) {
                    const Real* dr = dy.v.data() + size_t(p) * c;
                    const Real* xr = x.v.data() + size_t(p) * c;
                    Real* dxr = dx.v.data() + size_t(p) * c;
                    for (int ci = 0; ci < c; ++ci) {
                        const Real xhat = (xr[ci] - mean[ci]) * inv_std[ci];
                        dxr[ci] += gamma.value[ci] * inv_std[ci] *
                                   (dr[ci] - sum_dy[ci] / n - xhat * sum_dy_xhat[ci] / n);
                    }
                }
            };
        }
        return out;
    }

    // eval: normalize with running statistics (affine per channel)
    std::vector<Real> scale(c), shift(c);
    for (int ci = 0; ci < c; ++ci) {
        scale[ci] = gamma.value[ci] / std::sqrt(run_var.value[ci] + kNormEps);
        shift[ci] = beta.value[ci] - scale[ci] * run_mean.value[ci];
    }
    for (int p = 0; p < n; ++p) {
        const Real* r = x.v.data() + size_t(p) * c;
        Real* o = y.v.data() + size_t(p) * c;
        for (int ci = 0; ci < c; ++ci) o[ci] = scale[ci] * r[ci] + shift[ci];
    }
    Val out = make_node(std::move(y), nullptr);
    if (record_) {
        nodes_[size_t(out)].back = [xv, out, scale](Graph& g) {
            Tensor& dx = g.grad_ref(xv);
            if (dx.size() == 0) return;
            const Tensor& dy = g.grad(out);
            const int c = dy.c;
            for (int p = 0; p < dy.h * dy.w; ++p) {
                const Real* dr = dy.v.data() + size_t(p) * c;
                Real* dxr = dx.v.data() + size_t(p) * c;
                for (int ci = 0; ci < c; ++ci) dxr[ci] += scale[ci] * dr[ci];
            }
        };
    }
    return out;
}

Graph::Val Graph::sum(Val xv) {
    const Tensor& x = value(xv);
    Tensor s(1, 1, 1);
    Real acc = 0.0;
    for (Real e : x.v) acc += e;
    s.v[0] = acc;
    Val out = make_node(std::move(s), nullptr);
    if (record_) {
        nodes_[size_t(out)].back = [xv, out](Graph& g) {
            Tensor& dx = g.grad_ref(xv);
            if (dx.size() == 0) return;
            const Real dy = g.grad(out).v[0];
            for (Real& e : dx.v) e += dy;
        };
    }
    return out;
}

Graph::Val Graph::weighted_sum(const std::vector<std::pair<Real, Val>>& terms) {
    if (terms.empty()) throw std::invalid_argument("weighted_sum: no terms");
    Real s = 0.0;
    for (const auto& [coeff, v] : terms) {
        if (value(v).size() != 1) throw std::invalid_argument("weighted_sum: non-scalar term");
        s += coeff * value(v).v[0];
    }
    Tensor y(1, 1, 1);
    y.v[0] = s;
    Val out = make_node(std::move(y), nullptr);
    if (record_) {
        auto ts = terms;
        nodes_[size_t(out)].back = [ts, out](Graph& g) {
            const Real dy = g.grad(out).v[0];
            for (const auto& [coeff, v] : ts) {
                Tensor& d = g.grad_ref(v);
                if (d.size()) d.v[0] += coeff * dy;
            }
        };
    }
    return out;
}

}  // namespace dtnet
