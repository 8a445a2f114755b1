#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dtnet {

using Real = double;

// Dense H x W x C feature map, channel-fastest layout.
struct Tensor {
    int h = 0, w = 0, c = 0;
    std::vector<Real> v;

    Tensor() = default;
    Tensor(int h_, int w_, int c_) : h(h_), w(w_), c(c_), v(size_t(h_) * w_ * c_, 0.0) {
        if (h_ < 1 || w_ < 1 || c_ < 1) throw std::invalid_argument("Tensor: dims must be >= 1");
    }

    size_t size() const { return v.size(); }
    Real& at(int y, int x, int ch) { return v[(size_t(y) * w + x) * c + ch]; }
    Real at(int y, int x, int ch) const { return v[(size_t(y) * w + x) * c + ch]; }
    Real* row(int y, int x) { return v.data() + (size_t(y) * w + x) * c; }
    const Real* row(int y, int x) const { return v.data() + (size_t(y) * w + x) * c; }

    bool same_shape(const Tensor& o) const { return h == o.h && w == o.w && c == o.c; }
    std::string shape_str() const;

    void fill(Real x) { std::fill(v.begin(), v.end(), x); }
    bool all_finite() const;
    Real min_value() const;
    Real max_value() const;
};

// Returns true if every element compares bitwise equal.
bool bitwise_equal(const Tensor& a, const Tensor& b);

// Max |a-b| over all elements; shapes must match.
Real max_abs_diff(const Tensor& a, const Tensor& b);

// Deterministic 64-bit mixing (splitmix64), used to derive independent
// seeds from a master seed plus a tag.
uint64_t mix_seed(uint64_t seed, uint64_t tag);
uint64_t hash_str(const std::string& s);

}  // namespace dtnet
