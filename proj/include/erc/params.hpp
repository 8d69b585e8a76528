#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "erc/autograd.hpp"
#include "erc/tensor.hpp"

namespace erc {

// Learning-rate groups (per-group base rates come from ModelConfig).
enum class ParamGroup { Transformer = 0, Graph = 1, Crf = 2 };

struct ParamTensor {
    std::string name;
    Tensor value;
    Tensor grad;
    ParamGroup group = ParamGroup::Transformer;
    bool trainable = true;
};

// Ordered, named parameter tensors. Order is creation order and is the
// canonical order for serialization, gradient checking and optimizer state.
class ParamSet {
public:
    int add(const std::string& name, Tensor init, ParamGroup group, bool trainable = true);
    int index_of(const std::string& name) const;
    bool contains(const std::string& name) const { return by_name_.count(name) > 0; }

    ParamTensor& operator[](int i) { return items_[i]; }
    const ParamTensor& operator[](int i) const { return items_[i]; }
    ParamTensor& at(const std::string& name) { return items_[index_of(name)]; }
    const ParamTensor& at(const std::string& name) const { return items_[index_of(name)]; }

    int count() const { return static_cast<int>(items_.size()); }
    void zero_grads();
    double grad_squared_norm() const;
    void scale_grads(double k);

private:
    std::vector<ParamTensor> items_;
    std::unordered_map<std::string, int> by_name_;
};

// Per-forward bridge between stored parameters and tape leaves. Leaves are
// created on first use; collect_grads() folds their gradients back into the
// ParamSet after backward().
class Binder {
public:
    explicit Binder(ParamSet& ps, bool with_grad = true) : ps_(ps), with_grad_(with_grad), leaves_(ps.count()) {}

    Var operator[](int index);
    Var operator()(const std::string& name) { return (*this)[ps_.index_of(name)]; }

    void collect_grads();

private:
    ParamSet& ps_;
    bool with_grad_;
    std::vector<Var> leaves_;
};

} // namespace erc
