#include "erc/params.hpp"

namespace erc {

int ParamSet::add(const std::string& name, Tensor init, ParamGroup group, bool trainable) {
    if (by_name_.count(name)) throw NumericError("duplicate parameter name: " + name);
    ParamTensor p;
    p.name = name;
    p.grad = Tensor::zeros(init.shape);
    p.value = std::move(init);
    p.group = group;
    p.trainable = trainable;
    items_.push_back(std::move(p));
    int idx = static_cast<int>(items_.size()) - 1;
    by_name_[name] = idx;
    return idx;
}

int ParamSet::index_of(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw NumericError("unknown parameter: " + name);
    return it->second;
}

void ParamSet::zero_grads() {
    for (auto& p : items_) p.grad.fill(0.0);
}

double ParamSet::grad_squared_norm() const {
    double s = 0.0;
    for (const auto& p : items_) {
        if (p.trainable) s += p.grad.squared_norm();
    }
    return s;
}

void ParamSet::scale_grads(double k) {
    for (auto& p : items_) {
        if (!p.trainable) continue;
        for (double& g : p.grad.v) g *= k;
    }
}

Var Binder::operator[](int index) {
    Var& slot = leaves_[index];
    if (!slot) {
        const ParamTensor& p = ps_[index];
        slot = leaf(p.value, with_grad_ && p.trainable);
    }
    return slot;
}

void Binder::collect_grads() {
    for (int i = 0; i < ps_.count(); ++i) {
        if (leaves_[i] && leaves_[i]->needs_grad && !leaves_[i]->grad.v.empty()) {
            ps_[i].grad.add_scaled(leaves_[i]->grad, 1.0);
        }
    }
}

} // namespace erc
