#pragma once

// Straight-line reference implementations used as independent oracles.
// These deliberately avoid Graph/BLAS code paths.

#include <algorithm>
#include <cmath>
#include <vector>

#include "dtnet/params.hpp"
#include "dtnet/tensor.hpp"

namespace dtnet::testutil {

inline Tensor conv_ref(const Tensor& x, const Param& w, const Param& b, int stride = 1) {
    const int k = w.dims[0], cin = w.dims[2], cout = w.dims[3];
    const int pad = (k - 1) / 2;
    const int oh = (x.h + stride - 1) / stride;
    const int ow = (x.w + stride - 1) / stride;
    Tensor y(oh, ow, cout);
    for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox)
            for (int co = 0; co < cout; ++co) {
                Real acc = b.value[size_t(co)];
                for (int ky = 0; ky < k; ++ky)
                    for (int kx = 0; kx < k; ++kx) {
                        const int iy = oy * stride + ky - pad;
                        const int ix = ox * stride + kx - pad;
                        if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                        for (int ci = 0; ci < cin; ++ci)
                            acc += x.at(iy, ix, ci) *
                                   w.value[size_t(((ky * k + kx) * cin + ci)) * cout + co];
                    }
                y.at(oy, ox, co) = acc;
            }
    return y;
}

inline Tensor relu_ref(Tensor x) {
    for (Real& e : x.v) e = std::max(e, 0.0);
    return x;
}

inline Tensor concat_ref(const Tensor& a, const Tensor& b) {
    Tensor y(a.h, a.w, a.c + b.c);
    for (int p = 0; p < a.h * a.w; ++p) {
        for (int ci = 0; ci < a.c; ++ci) y.v[size_t(p) * y.c + ci] = a.v[size_t(p) * a.c + ci];
        for (int ci = 0; ci < b.c; ++ci)
            y.v[size_t(p) * y.c + a.c + ci] = b.v[size_t(p) * b.c + ci];
    }
    return y;
}

inline Tensor add_ref(const Tensor& a, const Tensor& b) {
    Tensor y = a;
    for (size_t i = 0; i < y.size(); ++i) y.v[i] += b.v[i];
    return y;
}

inline Tensor mul_ref(const Tensor& a, const Tensor& b) {
    Tensor y = a;
    for (size_t i = 0; i < y.size(); ++i) y.v[i] *= b.v[i];
    return y;
}

inline Tensor salience_map_ref(const Tensor& x, Real eps = 1e-6) {
    Tensor m(x.h, x.w, 1);
    for (int p = 0; p < x.h * x.w; ++p) {
        Real s = 0.0;
        for (int ci = 0; ci < x.c; ++ci) s += x.v[size_t(p) * x.c + ci];
        m.v[size_t(p)] = s / x.c;
    }
    const Real mx = *std::max_element(m.v.begin(), m.v.end());
    Tensor y(x.h, x.w, 1);
    if (mx > 0.0)
        for (size_t i = 0; i < m.size(); ++i) y.v[i] = m.v[i] / std::max(mx, eps);
    return y;
}

inline Tensor mul_mask_ref(const Tensor& x, const Tensor& mask) {
    Tensor y = x;
    for (int p = 0; p < x.h * x.w; ++p)
        for (int ci = 0; ci < x.c; ++ci) y.v[size_t(p) * x.c + ci] *= mask.v[size_t(p)];
    return y;
}

}  // namespace dtnet::testutil
