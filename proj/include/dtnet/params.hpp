#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

#include "dtnet/tensor.hpp"

namespace dtnet {

// Named weight array with gradient and optimizer state. Dims are free-form
// (conv kernels are {k, k, cin, cout}, per-channel vectors are {c}).
struct Param {
    std::string name;
    std::vector<int> dims;
    std::vector<Real> value;
    std::vector<Real> grad;
    std::vector<Real> adam_m;
    std::vector<Real> adam_v;
    bool trainable = true;  // false for normalization running statistics

    size_t size() const { return value.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

// Owns all parameters of one network. Deque keeps addresses stable so
// modules can hold Param* across registrations.
class ParamStore {
public:
    // Fan-in-scaled normal init, seeded deterministically from (seed, name).
    Param& create(const std::string& name, std::vector<int> dims, uint64_t seed, int fan_in);
    // Constant-filled entry (normalization affine/running stats).
    Param& create_const(const std::string& name, std::vector<int> dims, Real fill_value,
                        bool trainable);

    Param* find(const std::string& name);
    const Param* find(const std::string& name) const;

    size_t count() const { return store_.size(); }
    size_t scalar_count() const;
    size_t trainable_scalar_count() const;

    std::deque<Param>& all() { return store_; }
    const std::deque<Param>& all() const { return store_; }

    void zero_grads();

private:
    std::deque<Param> store_;
    std::unordered_map<std::string, size_t> index_;
    Param& emplace(const std::string& name, std::vector<int> dims);
};

}  // namespace dtnet
