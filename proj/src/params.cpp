#include "dtnet/params.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace dtnet {

static size_t dims_product(const std::vector<int>& dims) {
    size_t n = 1;
    for (int d : dims) {
        if (d < 1) throw std::invalid_argument("Param: dims must be >= 1");
        n *= size_t(d);
    }
    return n;
}

Param& ParamStore::emplace(const std::string& name, std::vector<int> dims) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    size_t n = dims_product(dims);
    store_.emplace_back();
    Param& p = store_.back();
    p.name = name;
    p.dims = std::move(dims);
    p.value.assign(n, 0.0);
    p.grad.assign(n, 0.0);
    p.adam_m.assign(n, 0.0);
    p.adam_v.assign(n, 0.0);
    index_[name] = store_.size() - 1;
    return p;
}

Param& ParamStore::create(const std::string& name, std::vector<int> dims, uint64_t seed,
                          int fan_in) {
    Param& p = emplace(name, std::move(dims));
    // Per-name seeding keeps initial weights independent of registration order.
    std::mt19937_64 rng(mix_seed(seed, hash_str(name)));
    std::normal_distribution<Real> dist(0.0, std::sqrt(2.0 / Real(fan_in)));
    for (Real& x : p.value) x = dist(rng);
    return p;
}

Param& ParamStore::create_const(const std::string& name, std::vector<int> dims, Real fill_value,
                                bool trainable) {
    Param& p = emplace(name, std::move(dims));
    std::fill(p.value.begin(), p.value.end(), fill_value);
    p.trainable = trainable;
    return p;
}

Param* ParamStore::find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &store_[it->second];
}

const Param* ParamStore::find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &store_[it->second];
}

size_t ParamStore::scalar_count() const {
    size_t n = 0;
    for (const Param& p : store_) n += p.size();
    return n;
}

size_t ParamStore::trainable_scalar_count() const {
    size_t n = 0;
    for (const Param& p : store_)
        if (p.trainable) n += p.size();
    return n;
}

void ParamStore::zero_grads() {
    for (Param& p : store_) p.zero_grad();
}

}  // namespace dtnet
