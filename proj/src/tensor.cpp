#include "dtnet/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace dtnet {

std::string Tensor::shape_str() const {
    return std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c);
}

bool Tensor::all_finite() const {
    for (Real x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

Real Tensor::min_value() const { return *std::min_element(v.begin(), v.end()); }
Real Tensor::max_value() const { return *std::max_element(v.begin(), v.end()); }

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    return std::equal(a.v.begin(), a.v.end(), b.v.begin());
}

Real max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
    Real m = 0.0;
    for (size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::fabs(a.v[i] - b.v[i]));
    return m;
}

uint64_t mix_seed(uint64_t seed, uint64_t tag) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ull * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

uint64_t hash_str(const std::string& s) {
    uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace dtnet
