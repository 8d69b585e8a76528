#include "erc/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace erc {

namespace {

const double kNegInf = -std::numeric_limits<double>::infinity();

Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->val = std::move(value);
    for (auto& p : parents) {
        if (p->needs_grad) n->needs_grad = true;
    }
    if (n->needs_grad) {
        n->parents = std::move(parents);
        n->backprop = std::move(backprop);
    }
    return n;
}

void require_same_shape(const Var& a, const Var& b, const char* who) {
    if (!a->val.same_shape(b->val)) {
        throw NumericError(std::string(who) + ": shape mismatch " + a->val.shape_str() + " vs " + b->val.shape_str());
    }
}

} // namespace

Var constant(Tensor value) {
    auto n = std::make_shared<Node>();
    n->val = std::move(value);
    n->needs_grad = false;
    return n;
}

Var leaf(Tensor value, bool needs_grad) {
    auto n = std::make_shared<Node>();
    n->val = std::move(value);
    n->needs_grad = needs_grad;
    return n;
}

Var add(const Var& a, const Var& b) {
    require_same_shape(a, b, "add");
    return make_node(add(a->val, b->val), {a, b}, [](Node& n) {
        if (n.parents[0]->needs_grad) n.parents[0]->g().add_scaled(n.grad, 1.0);
        if (n.parents[1]->needs_grad) n.parents[1]->g().add_scaled(n.grad, 1.0);
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a, b, "sub");
    return make_node(sub(a->val, b->val), {a, b}, [](Node& n) {
        if (n.parents[0]->needs_grad) n.parents[0]->g().add_scaled(n.grad, 1.0);
        if (n.parents[1]->needs_grad) n.parents[1]->g().add_scaled(n.grad, -1.0);
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a, b, "mul");
    return make_node(mul(a->val, b->val), {a, b}, [](Node& n) {
        Node& a = *n.parents[0];
        Node& b = *n.parents[1];
        if (a.needs_grad) {
            Tensor& ga = a.g();
            for (size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += n.grad.v[i] * b.val.v[i];
        }
        if (b.needs_grad) {
            Tensor& gb = b.g();
            for (size_t i = 0; i < gb.v.size(); ++i) gb.v[i] += n.grad.v[i] * a.val.v[i];
        }
    });
}

Var add_rowvec(const Var& m, const Var& r) {
    if (r->val.rows() != 1 || r->val.cols() != m->val.cols()) {
        throw NumericError("add_rowvec: " + m->val.shape_str() + " vs " + r->val.shape_str());
    }
    Tensor out = m->val;
    int n = out.rows(), c = out.cols();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j) out.at(i, j) += r->val[j];
    return make_node(std::move(out), {m, r}, [](Node& nd) {
        Node& m = *nd.parents[0];
        Node& r = *nd.parents[1];
        int n = nd.val.rows(), c = nd.val.cols();
        if (m.needs_grad) m.g().add_scaled(nd.grad, 1.0);
        if (r.needs_grad) {
            Tensor& gr = r.g();
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < c; ++j) gr[j] += nd.grad.at(i, j);
        }
    });
}

Var add_colvec(const Var& m, const Var& c) {
    if (c->val.cols() != 1 || c->val.rows() != m->val.rows()) {
        throw NumericError("add_colvec: " + m->val.shape_str() + " vs " + c->val.shape_str());
    }
    Tensor out = m->val;
    int n = out.rows(), w = out.cols();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < w; ++j) out.at(i, j) += c->val[i];
    return make_node(std::move(out), {m, c}, [](Node& nd) {
        Node& m = *nd.parents[0];
        Node& c = *nd.parents[1];
        int n = nd.val.rows(), w = nd.val.cols();
        if (m.needs_grad) m.g().add_scaled(nd.grad, 1.0);
        if (c.needs_grad) {
            Tensor& gc = c.g();
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < w; ++j) gc[i] += nd.grad.at(i, j);
        }
    });
}

Var scale(const Var& a, double k) {
    return make_node(scale(a->val, k), {a}, [k](Node& n) {
        if (n.parents[0]->needs_grad) n.parents[0]->g().add_scaled(n.grad, k);
    });
}

Var matmul(const Var& a, const Var& b) {
    return make_node(matmul(a->val, b->val), {a, b}, [](Node& n) {
        Node& a = *n.parents[0];
        Node& b = *n.parents[1];
        if (a.needs_grad) {
            Tensor da = matmul(n.grad, transpose(b.val));
            a.g().add_scaled(da, 1.0);
        }
        if (b.needs_grad) {
            Tensor db = matmul(transpose(a.val), n.grad);
            b.g().add_scaled(db, 1.0);
        }
    });
}

Var transpose(const Var& a) {
    return make_node(transpose(a->val), {a}, [](Node& n) {
        if (n.parents[0]->needs_grad) n.parents[0]->g().add_scaled(transpose(n.grad), 1.0);
    });
}

Var relu(const Var& a) {
    Tensor out = a->val;
    for (double& x : out.v) x = x > 0.0 ? x : 0.0;
    return make_node(std::move(out), {a}, [](Node& n) {
        Node& a = *n.parents[0];
        if (!a.needs_grad) return;
        Tensor& ga = a.g();
        for (size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += a.val.v[i] > 0.0 ? n.grad.v[i] : 0.0;
    });
}

Var leaky_relu(const Var& a, double slope) {
    Tensor out = a->val;
    for (double& x : out.v) x = x >= 0.0 ? x : slope * x;
    return make_node(std::move(out), {a}, [slope](Node& n) {
        Node& a = *n.parents[0];
        if (!a.needs_grad) return;
        Tensor& ga = a.g();
        for (size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += (a.val.v[i] >= 0.0 ? 1.0 : slope) * n.grad.v[i];
    });
}

Var sigmoid(const Var& a) {
    Tensor out = a->val;
    for (double& x : out.v) x = 1.0 / (1.0 + std::exp(-x));
    return make_node(std::move(out), {a}, [](Node& n) {
        Node& a = *n.parents[0];
        if (!a.needs_grad) return;
        Tensor& ga = a.g();
        for (size_t i = 0; i < ga.v.size(); ++i) {
            double y = n.val.v[i];
            ga.v[i] += y * (1.0 - y) * n.grad.v[i];
        }
    });
}

namespace {

// shared softmax backward: dx = y * (dy - sum(dy * y)) per row
void softmax_backward(Node& n) {
    Node& a = *n.parents[0];
    if (!a.needs_grad) return;
    Tensor& ga = a.g();
    int rows = n.val.rows(), cols = n.val.cols();
    for (int i = 0; i < rows; ++i) {
        double dot = 0.0;
        for (int j = 0; j < cols; ++j) dot += n.grad.at(i, j) * n.val.at(i, j);
        for (int j = 0; j < cols; ++j) {
            ga.v[static_cast<size_t>(i) * cols + j] += n.val.at(i, j) * (n.grad.at(i, j) - dot);
        }
    }
}

} // namespace

Var softmax_rows(const Var& a) {
    return make_node(softmax_rows(a->val), {a}, softmax_backward);
}

Var masked_softmax_rows(const Var& a, const Tensor& mask) {
    if (!a->val.same_shape(mask)) {
        throw NumericError("masked_softmax: mask shape " + mask.shape_str() + " vs " + a->val.shape_str());
    }
    Tensor logits = a->val;
    for (size_t i = 0; i < logits.v.size(); ++i) {
        if (mask.v[i] == kNegInf) logits.v[i] = kNegInf;
    }
    return make_node(softmax_rows(logits), {a}, softmax_backward);
}

Var log_softmax_rows(const Var& a) {
    return make_node(log_softmax_rows(a->val), {a}, [](Node& n) {
        Node& a = *n.parents[0];
        if (!a.needs_grad) return;
        Tensor& ga = a.g();
        int rows = n.val.rows(), cols = n.val.cols();
        for (int i = 0; i < rows; ++i) {
            double gsum = 0.0;
            for (int j = 0; j < cols; ++j) gsum += n.grad.at(i, j);
            for (int j = 0; j < cols; ++j) {
                double p = std::exp(n.val.at(i, j));
                ga.v[static_cast<size_t>(i) * cols + j] += n.grad.at(i, j) - p * gsum;
            }
        }
    });
}

Var logsumexp_rows(const Var& a) {
    return make_node(logsumexp_rows(a->val), {a}, [](Node& n) {
        Node& a = *n.parents[0];
        if (!a.needs_grad) return;
        Tensor& ga = a.g();
        int rows = a.val.rows(), cols = a.val.cols();
        for (int i = 0; i < rows; ++i) {
            double lse = n.val.at(i, 0);
            double gi = n.grad.at(i, 0);
            for (int j = 0; j < cols; ++j) {
                double x = a.val.at(i, j);
                double p = (x == kNegInf) ? 0.0 : std::exp(x - lse);
                ga.v[static_cast<size_t>(i) * cols + j] += gi * p;
            }
        }
    });
}

Var layer_norm_rows(const Var& a, const Var& gain, const Var& bias, double eps) {
    return make_node(layer_norm_rows(a->val, gain->val, bias->val, eps), {a, gain, bias}, [eps](Node& n) {
        Node& a = *n.parents[0];
        Node& gain = *n.parents[1];
        Node& bias = *n.parents[2];
        int rows = a.val.rows(), cols = a.val.cols();
        for (int i = 0; i < rows; ++i) {
            double mean = 0.0;
            for (int j = 0; j < cols; ++j) mean += a.val.at(i, j);
            mean /= cols;
            double var = 0.0;
            for (int j = 0; j < cols; ++j) {
                double d = a.val.at(i, j) - mean;
                var += d * d;
            }
            var /= cols;
            double inv = 1.0 / std::sqrt(var + eps);
            // xhat_j = (x_j - mean) * inv
            double mean_gdy = 0.0, mean_gdy_xhat = 0.0;
            for (int j = 0; j < cols; ++j) {
                double xhat = (a.val.at(i, j) - mean) * inv;
                double gdy = gain.val[j] * n.grad.at(i, j);
                mean_gdy += gdy;
                mean_gdy_xhat += gdy * xhat;
            }
            mean_gdy /= cols;
            mean_gdy_xhat /= cols;
            for (int j = 0; j < cols; ++j) {
                double xhat = (a.val.at(i, j) - mean) * inv;
                if (a.needs_grad) {
                    double gdy = gain.val[j] * n.grad.at(i, j);
                    a.g().v[static_cast<size_t>(i) * cols + j] += inv * (gdy - mean_gdy - xhat * mean_gdy_xhat);
                }
                if (gain.needs_grad) gain.g()[j] += n.grad.at(i, j) * xhat;
                if (bias.needs_grad) bias.g()[j] += n.grad.at(i, j);
            }
        }
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw NumericError("concat_cols: no parts");
    int rows = parts[0]->val.rows();
    int total = 0;
    for (const auto& p : parts) {
        if (p->val.rows() != rows) {
            throw NumericError("concat_cols: row mismatch " + p->val.shape_str());
        }
        total += p->val.cols();
    }
    Tensor out({rows, total});
    int off = 0;
    for (const auto& p : parts) {
        int c = p->val.cols();
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < c; ++j) out.at(i, off + j) = p->val.at(i, j);
        off += c;
    }
    return make_node(std::move(out), parts, [](Node& n) {
        int rows = n.val.rows();
        int off = 0;
        for (auto& pvar : n.parents) {
            Node& p = *pvar;
            int c = p.val.cols();
            if (p.needs_grad) {
                Tensor& gp = p.g();
                for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < c; ++j) gp.v[static_cast<size_t>(i) * c + j] += n.grad.at(i, off + j);
            }
            off += c;
        }
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw NumericError("concat_rows: no parts");
    int cols = parts[0]->val.cols();
    int total = 0;
    for (const auto& p : parts) {
        if (p->val.cols() != cols) {
            throw NumericError("concat_rows: column mismatch " + p->val.shape_str());
        }
        total += p->val.rows();
    }
    Tensor out({total, cols});
    int off = 0;
    for (const auto& p : parts) {
        for (int i = 0; i < p->val.rows(); ++i)
            for (int j = 0; j < cols; ++j) out.at(off + i, j) = p->val.at(i, j);
        off += p->val.rows();
    }
    return make_node(std::move(out), parts, [](Node& n) {
        int cols = n.val.cols();
        int off = 0;
        for (auto& pvar : n.parents) {
            Node& p = *pvar;
            int r = p.val.rows();
            if (p.needs_grad) {
                Tensor& gp = p.g();
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < cols; ++j) gp.v[static_cast<size_t>(i) * cols + j] += n.grad.at(off + i, j);
            }
            off += r;
        }
    });
}

Var slice_rows(const Var& a, int r0, int nrows) {
    if (r0 < 0 || r0 + nrows > a->val.rows()) {
        throw NumericError("slice_rows: range out of bounds for " + a->val.shape_str());
    }
    int cols = a->val.cols();
    Tensor out({nrows, cols});
    for (int i = 0; i < nrows; ++i)
        for (int j = 0; j < cols; ++j) out.at(i, j) = a->val.at(r0 + i, j);
    return make_node(std::move(out), {a}, [r0](Node& n) {
        Node& a = *n.parents[0];
        if (!a.needs_grad) return;
        Tensor& ga = a.g();
        int cols = n.val.cols();
        for (int i = 0; i < n.val.rows(); ++i)
            for (int j = 0; j < cols; ++j) ga.at(r0 + i, j) += n.grad.at(i, j);
    });
}

Var slice_cols(const Var& a, int c0, int ncols) {
    if (c0 < 0 || c0 + ncols > a->val.cols()) {
        throw NumericError("slice_cols: range out of bounds for " + a->val.shape_str());
    }
    int rows = a->val.rows();
    Tensor out({rows, ncols});
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < ncols; ++j) out.at(i, j) = a->val.at(i, c0 + j);
    return make_node(std::move(out), {a}, [c0](Node& n) {
        Node& a = *n.parents[0];
        if (!a.needs_grad) return;
        Tensor& ga = a.g();
        for (int i = 0; i < n.val.rows(); ++i)
            for (int j = 0; j < n.val.cols(); ++j) ga.at(i, c0 + j) += n.grad.at(i, j);
    });
}

Var pick(const Var& a, int i, int j) {
    if (i < 0 || i >= a->val.rows() || j < 0 || j >= a->val.cols()) {
        throw NumericError("pick: index out of bounds for " + a->val.shape_str());
    }
    Tensor out({1, 1});
    out[0] = a->val.at(i, j);
    return make_node(std::move(out), {a}, [i, j](Node& n) {
        Node& a = *n.parents[0];
        if (a.needs_grad) a.g().at(i, j) += n.grad[0];
    });
}

Var rows_lookup(const Var& table, const std::vector<int>& ids) {
    int cols = table->val.cols();
    Tensor out({static_cast<int>(ids.size()), cols});
    for (size_t i = 0; i < ids.size(); ++i) {
        int r = ids[i];
        if (r < 0 || r >= table->val.rows()) throw NumericError("rows_lookup: id out of range");
        for (int j = 0; j < cols; ++j) out.at(static_cast<int>(i), j) = table->val.at(r, j);
    }
    return make_node(std::move(out), {table}, [ids](Node& n) {
        Node& t = *n.parents[0];
        if (!t.needs_grad) return;
        Tensor& gt = t.g();
        int cols = n.val.cols();
        for (size_t i = 0; i < ids.size(); ++i)
            for (int j = 0; j < cols; ++j) gt.at(ids[i], j) += n.grad.at(static_cast<int>(i), j);
    });
}

Var gather_matrix(const Var& values, const std::vector<int>& idx, int rows, int cols) {
    if (values->val.rows() != 1) throw NumericError("gather_matrix: values must be 1xV");
    if (static_cast<int>(idx.size()) != rows * cols) throw NumericError("gather_matrix: index size mismatch");
    Tensor out({rows, cols});
    for (size_t i = 0; i < idx.size(); ++i) {
        int k = idx[i];
        if (k >= values->val.cols()) throw NumericError("gather_matrix: index out of range");
        out.v[i] = k >= 0 ? values->val[k] : 0.0;
    }
    return make_node(std::move(out), {values}, [idx](Node& n) {
        Node& v = *n.parents[0];
        if (!v.needs_grad) return;
        Tensor& gv = v.g();
        for (size_t i = 0; i < idx.size(); ++i) {
            if (idx[i] >= 0) gv[idx[i]] += n.grad.v[i];
        }
    });
}

Var im2col(const Var& a, int k) {
    if (k <= 0) throw NumericError("im2col: kernel must be positive");
    int rows = a->val.rows(), cols = a->val.cols();
    int padded = std::max(rows, k);
    int windows = padded - k + 1;
    Tensor out({windows, k * cols});
    for (int w = 0; w < windows; ++w) {
        for (int r = 0; r < k; ++r) {
            int src = w + r;
            for (int j = 0; j < cols; ++j) {
                out.at(w, r * cols + j) = src < rows ? a->val.at(src, j) : 0.0;
            }
        }
    }
    return make_node(std::move(out), {a}, [k, rows, cols](Node& n) {
        Node& a = *n.parents[0];
        if (!a.needs_grad) return;
        Tensor& ga = a.g();
        for (int w = 0; w < n.val.rows(); ++w) {
            for (int r = 0; r < k; ++r) {
                int src = w + r;
                if (src >= rows) continue;
                for (int j = 0; j < cols; ++j) ga.at(src, j) += n.grad.at(w, r * cols + j);
            }
        }
    });
}

Var colwise_max(const Var& a) {
    int rows = a->val.rows(), cols = a->val.cols();
    Tensor out({1, cols});
    std::vector<int> arg(cols, 0);
    for (int j = 0; j < cols; ++j) {
        double best = a->val.at(0, j);
        for (int i = 1; i < rows; ++i) {
            if (a->val.at(i, j) > best) {
                best = a->val.at(i, j);
                arg[j] = i;
            }
        }
        out[j] = best;
    }
    return make_node(std::move(out), {a}, [arg](Node& n) {
        Node& a = *n.parents[0];
        if (!a.needs_grad) return;
        Tensor& ga = a.g();
        for (int j = 0; j < n.val.cols(); ++j) ga.at(arg[j], j) += n.grad[j];
    });
}

Var mul_const(const Var& a, const Tensor& m) {
    if (!a->val.same_shape(m)) {
        throw NumericError("mul_const: shape mismatch " + a->val.shape_str() + " vs " + m.shape_str());
    }
    return make_node(mul(a->val, m), {a}, [m](Node& n) {
        Node& a = *n.parents[0];
        if (!a.needs_grad) return;
        Tensor& ga = a.g();
        for (size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += n.grad.v[i] * m.v[i];
    });
}

Var fuse_mix(const Var& z, const Var& a, const Var& b) {
    require_same_shape(z, a, "fuse_mix");
    require_same_shape(a, b, "fuse_mix");
    Tensor out = b->val;
    for (size_t i = 0; i < out.v.size(); ++i) {
        double av = a->val.v[i], bv = b->val.v[i];
        double mixed = bv + z->val.v[i] * (av - bv);
        double lo = std::min(av, bv), hi = std::max(av, bv);
        out.v[i] = std::min(std::max(mixed, lo), hi);
    }
    return make_node(std::move(out), {z, a, b}, [](Node& n) {
        Node& z = *n.parents[0];
        Node& a = *n.parents[1];
        Node& b = *n.parents[2];
        for (size_t i = 0; i < n.val.v.size(); ++i) {
            double g = n.grad.v[i];
            double zv = z.val.v[i];
            if (z.needs_grad) z.g().v[i] += g * (a.val.v[i] - b.val.v[i]);
            if (a.needs_grad) a.g().v[i] += g * zv;
            if (b.needs_grad) b.g().v[i] += g * (1.0 - zv);
        }
    });
}

Var sum_all(const Var& a) {
    Tensor out({1, 1});
    double s = 0.0;
    for (double x : a->val.v) s += x;
    out[0] = s;
    return make_node(std::move(out), {a}, [](Node& n) {
        Node& a = *n.parents[0];
        if (a.needs_grad) a.g().add_scaled(Tensor::full(a.val.shape, 1.0), n.grad[0]);
    });
}

void backward(const Var& root) {
    if (root->val.size() != 1) {
        throw NumericError("backward: root must be a scalar, got " + root->val.shape_str());
    }
    if (!root->needs_grad) return;
    // iterative post-order DFS; visitation order is construction-determined
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.push_back({root.get(), 0});
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next].get();
            ++next;
            if (p->needs_grad && seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root->g()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backprop && !n->grad.v.empty()) n->backprop(*n);
    }
}

} // namespace erc
