#include "forge/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace forge {

namespace {

constexpr float kDivGuard = 1e-8f;

thread_local std::vector<Tape*> g_tape_stack;

float guard_denom(float b) { return b + std::copysign(kDivGuard, b); }

void ensure_grad(TensorData& t) {
    if (t.grad.empty()) t.grad.assign(t.data.size(), 0.0f);
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(Shape shape, float fill, bool requires_grad) : d_(std::make_shared<TensorData>()) {
    d_->shape = std::move(shape);
    d_->data.assign(shape_size(d_->shape), fill);
    d_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<float> values, bool requires_grad)
    : d_(std::make_shared<TensorData>()) {
    if (shape_size(shape) != values.size()) {
        throw ShapeMismatch("shape " + shape_str(shape) + " needs " +
                            std::to_string(shape_size(shape)) + " values, got " +
                            std::to_string(values.size()));
    }
    d_->shape = std::move(shape);
    d_->data = std::move(values);
    d_->requires_grad = requires_grad;
}

Tensor Tensor::detach() const {
    Tensor out;
    out.d_->shape = d_->shape;
    out.d_->data = d_->data;
    return out;
}

Tensor make_result(Shape shape, bool requires_grad) {
    Tensor t(std::move(shape), 0.0f, requires_grad);
    return t;
}

// ---- Tape -------------------------------------------------------------------

Tape::Tape() { g_tape_stack.push_back(this); }

Tape::~Tape() {
    if (!g_tape_stack.empty() && g_tape_stack.back() == this) g_tape_stack.pop_back();
}

Tape* Tape::active() { return g_tape_stack.empty() ? nullptr : g_tape_stack.back(); }

void Tape::record(std::function<void()> fn, std::vector<const void*> inputs, const void* output) {
    nodes_.push_back(std::move(fn));
    infos_.push_back(NodeInfo{std::move(inputs), output});
}

void Tape::backward(const Tensor& loss) {
    if (loss.size() != 1) {
        throw NotScalar("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
    }
    loss.d_->grad.assign(1, 1.0f);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    nodes_.clear();
    infos_.clear();
}

void backward(const Tensor& loss) {
    Tape* tape = Tape::active();
    if (!tape) throw std::logic_error("backward: no active tape");
    tape->backward(loss);
}

// ---- broadcasting -----------------------------------------------------------

namespace {

// Maps flat indices of `a` onto flat indices of `b`, with b right-aligned and
// 1-sized axes of b repeated. Throws if b cannot broadcast to a's shape.
struct BroadcastPlan {
    enum Kind { Same, Suffix, General } kind;
    std::size_t bsize = 0;
    std::vector<std::size_t> adims;
    std::vector<std::size_t> bstride;  // per a-axis stride into b (0 = broadcast)
};

BroadcastPlan make_plan(const Shape& a, const Shape& b) {
    BroadcastPlan plan;
    if (a == b) {
        plan.kind = BroadcastPlan::Same;
        return plan;
    }
    const std::size_t ra = a.size(), rb = b.size();
    if (rb > ra) throw ShapeMismatch(shape_str(b) + " does not broadcast to " + shape_str(a));
    bool pure_suffix = true;
    for (std::size_t j = 0; j < rb; ++j) {
        const std::size_t adim = a[ra - rb + j];
        if (b[j] != adim) {
            if (b[j] != 1) {
                throw ShapeMismatch(shape_str(b) + " does not broadcast to " + shape_str(a));
            }
            pure_suffix = false;
        }
    }
    plan.bsize = shape_size(b);
    if (pure_suffix) {
        plan.kind = BroadcastPlan::Suffix;
        return plan;
    }
    plan.kind = BroadcastPlan::General;
    plan.adims = a;
    plan.bstride.assign(ra, 0);
    std::size_t stride = 1;
    for (std::size_t j = rb; j-- > 0;) {
        if (b[j] != 1) plan.bstride[ra - rb + j] = stride;
        stride *= b[j];
    }
    return plan;
}

// Calls fn(a_flat_index, b_flat_index) over all elements of a.
template <typename Fn>
void for_broadcast(const BroadcastPlan& plan, std::size_t n, Fn&& fn) {
    switch (plan.kind) {
        case BroadcastPlan::Same:
            for (std::size_t i = 0; i < n; ++i) fn(i, i);
            break;
        case BroadcastPlan::Suffix:
            for (std::size_t i = 0; i < n; ++i) fn(i, i % plan.bsize);
            break;
        case BroadcastPlan::General: {
            const std::size_t ra = plan.adims.size();
            std::vector<std::size_t> idx(ra, 0);
            std::size_t bi = 0;
            for (std::size_t i = 0; i < n; ++i) {
                fn(i, bi);
                for (std::size_t ax = ra; ax-- > 0;) {
                    ++idx[ax];
                    bi += plan.bstride[ax];
                    if (idx[ax] < plan.adims[ax]) break;
                    bi -= plan.bstride[ax] * plan.adims[ax];
                    idx[ax] = 0;
                }
            }
            break;
        }
    }
}

}  // namespace

// ---- elementwise -----------------------------------------------------------

Tensor elementwise(EwOp op, const Tensor& a, const Tensor& b) {
    const BroadcastPlan plan = make_plan(a.shape(), b.shape());
    const std::size_t n = a.size();
    const bool needs_grad = a.requires_grad() || b.requires_grad();
    Tensor out = make_result(a.shape(), needs_grad && Tape::active() != nullptr);

    auto ad = a.storage();
    auto bd = b.storage();
    auto od = out.storage();
    const float* av = ad->data.data();
    const float* bv = bd->data.data();
    float* ov = od->data.data();

    switch (op) {
        case EwOp::Add:
            for_broadcast(plan, n, [&](std::size_t i, std::size_t j) { ov[i] = av[i] + bv[j]; });
            break;
        case EwOp::Sub:
            for_broadcast(plan, n, [&](std::size_t i, std::size_t j) { ov[i] = av[i] - bv[j]; });
            break;
        case EwOp::Mul:
            for_broadcast(plan, n, [&](std::size_t i, std::size_t j) { ov[i] = av[i] * bv[j]; });
            break;
        case EwOp::Div:
            for_broadcast(plan, n,
                          [&](std::size_t i, std::size_t j) { ov[i] = av[i] / guard_denom(bv[j]); });
            break;
    }

    Tape* tape = Tape::active();
    if (tape && needs_grad) {
        const bool agrad = a.requires_grad();
        const bool bgrad = b.requires_grad();
        tape->record(
            [op, plan, n, ad, bd, od, agrad, bgrad]() {
                if (od->grad.empty()) return;
                const float* g = od->grad.data();
                const float* av = ad->data.data();
                const float* bv = bd->data.data();
                if (agrad) ensure_grad(*ad);
                if (bgrad) ensure_grad(*bd);
                float* ga = agrad ? ad->grad.data() : nullptr;
                float* gb = bgrad ? bd->grad.data() : nullptr;
                switch (op) {
                    case EwOp::Add:
                        for_broadcast(plan, n, [&](std::size_t i, std::size_t j) {
                            if (ga) ga[i] += g[i];
                            if (gb) gb[j] += g[i];
                        });
                        break;
                    case EwOp::Sub:
                        for_broadcast(plan, n, [&](std::size_t i, std::size_t j) {
                            if (ga) ga[i] += g[i];
                            if (gb) gb[j] -= g[i];
                        });
                        break;
                    case EwOp::Mul:
                        for_broadcast(plan, n, [&](std::size_t i, std::size_t j) {
                            if (ga) ga[i] += g[i] * bv[j];
                            if (gb) gb[j] += g[i] * av[i];
                        });
                        break;
                    case EwOp::Div:
                        for_broadcast(plan, n, [&](std::size_t i, std::size_t j) {
                            const float d = guard_denom(bv[j]);
                            if (ga) ga[i] += g[i] / d;
                            if (gb) gb[j] -= g[i] * av[i] / (d * d);
                        });
                        break;
                }
            },
            {ad.get(), bd.get()}, od.get());
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(EwOp::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(EwOp::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(EwOp::Mul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return elementwise(EwOp::Div, a, b); }

Tensor scale(const Tensor& a, float c) {
    const std::size_t n = a.size();
    const bool needs_grad = a.requires_grad();
    Tensor out = make_result(a.shape(), needs_grad && Tape::active() != nullptr);
    auto ad = a.storage();
    auto od = out.storage();
    for (std::size_t i = 0; i < n; ++i) od->data[i] = c * ad->data[i];

    Tape* tape = Tape::active();
    if (tape && needs_grad) {
        tape->record(
            [c, n, ad, od]() {
                if (od->grad.empty()) return;
                ensure_grad(*ad);
                for (std::size_t i = 0; i < n; ++i) ad->grad[i] += c * od->grad[i];
            },
            {ad.get()}, od.get());
    }
    return out;
}

// ---- matmul -----------------------------------------------------------------

namespace {

// Row-major C[m,n] (+)= A·B with optional transposes on the stored operands.
// transA: A stored [k,m]; transB: B stored [n,k].
void gemm(float* c, const float* a, const float* b, std::size_t m, std::size_t n, std::size_t k,
          bool trans_a, bool trans_b, bool accumulate) {
    if (!accumulate) std::fill(c, c + m * n, 0.0f);
    if (!trans_a && !trans_b) {
        for (std::size_t i = 0; i < m; ++i) {
            const float* arow = a + i * k;
            float* crow = c + i * n;
            for (std::size_t p = 0; p < k; ++p) {
                const float av = arow[p];
                if (av == 0.0f) continue;
                const float* brow = b + p * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    } else if (!trans_a && trans_b) {
        for (std::size_t i = 0; i < m; ++i) {
            const float* arow = a + i * k;
            float* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                const float* brow = b + j * k;
                float acc = 0.0f;
                for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
                crow[j] += acc;
            }
        }
    } else if (trans_a && !trans_b) {
        for (std::size_t p = 0; p < k; ++p) {
            const float* arow = a + p * m;
            const float* brow = b + p * n;
            for (std::size_t i = 0; i < m; ++i) {
                const float av = arow[i];
                if (av == 0.0f) continue;
                float* crow = c + i * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    } else {
        throw std::logic_error("gemm: double transpose unsupported");
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    const Shape& as = a.shape();
    const Shape& bs = b.shape();
    std::size_t batches = 1, m = 0, k = 0, n = 0;
    bool batched_a = false, batched_b = false;
    if (as.size() == 2 && bs.size() == 2) {
        m = as[0];
        k = as[1];
        n = bs[1];
    } else if (as.size() == 3 && bs.size() == 2) {
        batches = as[0];
        batched_a = true;
        m = as[1];
        k = as[2];
        n = bs[1];
    } else if (as.size() == 3 && bs.size() == 3) {
        if (as[0] != bs[0]) {
            throw ShapeMismatch("matmul batch dims " + shape_str(as) + " vs " + shape_str(bs));
        }
        batches = as[0];
        batched_a = batched_b = true;
        m = as[1];
        k = as[2];
        n = bs[2];
    } else {
        throw ShapeMismatch("matmul ranks " + shape_str(as) + " vs " + shape_str(bs));
    }
    const std::size_t bk = batched_b ? bs[1] : bs[0];
    if (bk != k) throw ShapeMismatch("matmul inner dims " + shape_str(as) + " vs " + shape_str(bs));

    Shape out_shape = batched_a ? Shape{batches, m, n} : Shape{m, n};
    const bool needs_grad = a.requires_grad() || b.requires_grad();
    Tensor out = make_result(std::move(out_shape), needs_grad && Tape::active() != nullptr);

    auto ad = a.storage();
    auto bd = b.storage();
    auto od = out.storage();
    for (std::size_t t = 0; t < batches; ++t) {
        const float* ap = ad->data.data() + (batched_a ? t * m * k : 0);
        const float* bp = bd->data.data() + (batched_b ? t * k * n : 0);
        float* op = od->data.data() + t * m * n;
        gemm(op, ap, bp, m, n, k, false, false, false);
    }

    Tape* tape = Tape::active();
    if (tape && needs_grad) {
        const bool agrad = a.requires_grad();
        const bool bgrad = b.requires_grad();
        tape->record(
            [ad, bd, od, batches, m, n, k, batched_a, batched_b, agrad, bgrad]() {
                if (od->grad.empty()) return;
                if (agrad) ensure_grad(*ad);
                if (bgrad) ensure_grad(*bd);
                for (std::size_t t = 0; t < batches; ++t) {
                    const float* gp = od->grad.data() + t * m * n;
                    const float* ap = ad->data.data() + (batched_a ? t * m * k : 0);
                    const float* bp = bd->data.data() + (batched_b ? t * k * n : 0);
                    if (agrad) {
                        float* gap = ad->grad.data() + (batched_a ? t * m * k : 0);
                        gemm(gap, gp, bp, m, k, n, false, true, true);  // dA += dC·Bᵀ
                    }
                    if (bgrad) {
                        float* gbp = bd->grad.data() + (batched_b ? t * k * n : 0);
                        gemm(gbp, ap, gp, k, n, m, true, false, true);  // dB += Aᵀ·dC
                    }
                }
            },
            {ad.get(), bd.get()}, od.get());
    }
    return out;
}

Tensor transpose_last(const Tensor& a) {
    const Shape& as = a.shape();
    if (as.size() < 2 || as.size() > 3) {
        throw ShapeMismatch("transpose_last needs rank 2 or 3, got " + shape_str(as));
    }
    const std::size_t batches = as.size() == 3 ? as[0] : 1;
    const std::size_t m = as[as.size() - 2];
    const std::size_t n = as[as.size() - 1];
    Shape out_shape = as;
    out_shape[as.size() - 2] = n;
    out_shape[as.size() - 1] = m;

    const bool needs_grad = a.requires_grad();
    Tensor out = make_result(std::move(out_shape), needs_grad && Tape::active() != nullptr);
    auto ad = a.storage();
    auto od = out.storage();
    for (std::size_t t = 0; t < batches; ++t) {
        const float* ap = ad->data.data() + t * m * n;
        float* op = od->data.data() + t * m * n;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) op[j * m + i] = ap[i * n + j];
    }

    Tape* tape = Tape::active();
    if (tape && needs_grad) {
        tape->record(
            [ad, od, batches, m, n]() {
                if (od->grad.empty()) return;
                ensure_grad(*ad);
                for (std::size_t t = 0; t < batches; ++t) {
                    const float* gp = od->grad.data() + t * m * n;
                    float* gap = ad->grad.data() + t * m * n;
                    for (std::size_t j = 0; j < n; ++j)
                        for (std::size_t i = 0; i < m; ++i) gap[i * n + j] += gp[j * m + i];
                }
            },
            {ad.get()}, od.get());
    }
    return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_size(shape) != a.size()) {
        throw ShapeMismatch("reshape " + shape_str(a.shape()) + " to " + shape_str(shape));
    }
    const bool needs_grad = a.requires_grad();
    Tensor out = make_result(std::move(shape), needs_grad && Tape::active() != nullptr);
    auto ad = a.storage();
    auto od = out.storage();
    od->data = ad->data;

    Tape* tape = Tape::active();
    if (tape && needs_grad) {
        tape->record(
            [ad, od]() {
                if (od->grad.empty()) return;
                ensure_grad(*ad);
                for (std::size_t i = 0; i < ad->grad.size(); ++i) ad->grad[i] += od->grad[i];
            },
            {ad.get()}, od.get());
    }
    return out;
}

Tensor slice_last(const Tensor& a, std::size_t start, std::size_t len) {
    const Shape& as = a.shape();
    if (as.empty()) throw ShapeMismatch("slice_last on rank-0 tensor");
    const std::size_t last = as.back();
    if (start + len > last) {
        throw ShapeMismatch("slice_last [" + std::to_string(start) + "," +
                            std::to_string(start + len) + ") of width " + std::to_string(last));
    }
    Shape out_shape = as;
    out_shape.back() = len;
    const std::size_t rows = a.size() / last;

    const bool needs_grad = a.requires_grad();
    Tensor out = make_result(std::move(out_shape), needs_grad && Tape::active() != nullptr);
    auto ad = a.storage();
    auto od = out.storage();
    for (std::size_t r = 0; r < rows; ++r) {
        std::memcpy(od->data.data() + r * len, ad->data.data() + r * last + start,
                    len * sizeof(float));
    }

    Tape* tape = Tape::active();
    if (tape && needs_grad) {
        tape->record(
            [ad, od, rows, last, start, len]() {
                if (od->grad.empty()) return;
                ensure_grad(*ad);
                for (std::size_t r = 0; r < rows; ++r) {
                    const float* g = od->grad.data() + r * len;
                    float* ga = ad->grad.data() + r * last + start;
                    for (std::size_t j = 0; j < len; ++j) ga[j] += g[j];
                }
            },
            {ad.get()}, od.get());
    }
    return out;
}

Tensor concat_last(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeMismatch("concat_last of zero tensors");
    const Shape& first = parts[0].shape();
    std::size_t total_last = 0;
    bool needs_grad = false;
    for (const Tensor& p : parts) {
        const Shape& ps = p.shape();
        if (ps.size() != first.size() ||
            !std::equal(ps.begin(), ps.end() - 1, first.begin(), first.end() - 1)) {
            throw ShapeMismatch("concat_last leading dims differ: " + shape_str(first) + " vs " +
                                shape_str(ps));
        }
        total_last += ps.back();
        needs_grad = needs_grad || p.requires_grad();
    }
    Shape out_shape = first;
    out_shape.back() = total_last;
    const std::size_t rows = shape_size(out_shape) / total_last;

    Tensor out = make_result(std::move(out_shape), needs_grad && Tape::active() != nullptr);
    auto od = out.storage();
    std::size_t offset = 0;
    std::vector<const void*> input_ids;
    struct PartRef {
        std::shared_ptr<TensorData> d;
        std::size_t offset;
        std::size_t len;
        bool grad;
    };
    std::vector<PartRef> refs;
    for (const Tensor& p : parts) {
        const std::size_t len = p.shape().back();
        auto pd = p.storage();
        for (std::size_t r = 0; r < rows; ++r) {
            std::memcpy(od->data.data() + r * total_last + offset, pd->data.data() + r * len,
                        len * sizeof(float));
        }
        refs.push_back(PartRef{pd, offset, len, p.requires_grad()});
        input_ids.push_back(pd.get());
        offset += len;
    }

    Tape* tape = Tape::active();
    if (tape && needs_grad) {
        tape->record(
            [od, refs = std::move(refs), rows, total_last]() {
                if (od->grad.empty()) return;
                for (const PartRef& ref : refs) {
                    if (!ref.grad) continue;
                    ensure_grad(*ref.d);
                    for (std::size_t r = 0; r < rows; ++r) {
                        const float* g = od->grad.data() + r * total_last + ref.offset;
                        float* ga = ref.d->grad.data() + r * ref.len;
                        for (std::size_t j = 0; j < ref.len; ++j) ga[j] += g[j];
                    }
                }
            },
            std::move(input_ids), od.get());
    }
    return out;
}

// ---- reductions ------------------------------------------------------------

Tensor reduce(Red op, const Tensor& a, std::optional<std::size_t> axis, bool keepdims) {
    auto ad = a.storage();
    const std::size_t n = a.size();
    const bool needs_grad = a.requires_grad();
    Tape* tape = Tape::active();

    if (!axis.has_value()) {
        double acc = 0.0;
        for (float v : ad->data) acc += v;
        if (op == Red::Mean && n > 0) acc /= static_cast<double>(n);
        Tensor out = make_result(Shape{1}, needs_grad && tape != nullptr);
        out.values()[0] = static_cast<float>(acc);
        auto od = out.storage();
        if (tape && needs_grad) {
            const float w = op == Red::Mean && n > 0 ? 1.0f / static_cast<float>(n) : 1.0f;
            tape->record(
                [ad, od, n, w]() {
                    if (od->grad.empty()) return;
                    ensure_grad(*ad);
                    const float g = od->grad[0] * w;
                    for (std::size_t i = 0; i < n; ++i) ad->grad[i] += g;
                },
                {ad.get()}, od.get());
        }
        return out;
    }

    const std::size_t ax = *axis;
    const Shape& as = a.shape();
    if (ax >= as.size()) {
        throw AxisOutOfRange("axis " + std::to_string(ax) + " for shape " + shape_str(as));
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < ax; ++i) outer *= as[i];
    for (std::size_t i = ax + 1; i < as.size(); ++i) inner *= as[i];
    const std::size_t len = as[ax];

    Shape out_shape;
    for (std::size_t i = 0; i < as.size(); ++i) {
        if (i == ax) {
            if (keepdims) out_shape.push_back(1);
        } else {
            out_shape.push_back(as[i]);
        }
    }
    if (out_shape.empty()) out_shape.push_back(1);

    Tensor out = make_result(std::move(out_shape), needs_grad && tape != nullptr);
    auto od = out.storage();
    const float w = op == Red::Mean && len > 0 ? 1.0f / static_cast<float>(len) : 1.0f;
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            double acc = 0.0;
            const float* base = ad->data.data() + o * len * inner + in;
            for (std::size_t l = 0; l < len; ++l) acc += base[l * inner];
            od->data[o * inner + in] = static_cast<float>(acc) * w;
        }
    }

    if (tape && needs_grad) {
        tape->record(
            [ad, od, outer, inner, len, w]() {
                if (od->grad.empty()) return;
                ensure_grad(*ad);
                for (std::size_t o = 0; o < outer; ++o) {
                    for (std::size_t in = 0; in < inner; ++in) {
                        const float g = od->grad[o * inner + in] * w;
                        float* base = ad->grad.data() + o * len * inner + in;
                        for (std::size_t l = 0; l < len; ++l) base[l * inner] += g;
                    }
                }
            },
            {ad.get()}, od.get());
    }
    return out;
}

// ---- unaries ----------------------------------------------------------------

namespace {

float stable_sigmoid(float x) {
    if (x >= 0.0f) {
        return 1.0f / (1.0f + std::exp(-x));
    }
    const float e = std::exp(x);
    return e / (1.0f + e);
}

constexpr float kInvSqrt2 = 0.7071067811865475f;
constexpr float kInvSqrt2Pi = 0.3989422804014327f;

}  // namespace

Tensor activation(Act op, const Tensor& a) {
    const std::size_t n = a.size();
    const bool needs_grad = a.requires_grad();
    Tensor out = make_result(a.shape(), needs_grad && Tape::active() != nullptr);
    auto ad = a.storage();
    auto od = out.storage();
    const float* x = ad->data.data();
    float* y = od->data.data();
    switch (op) {
        case Act::Relu:
            for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
            break;
        case Act::Sigmoid:
            for (std::size_t i = 0; i < n; ++i) y[i] = stable_sigmoid(x[i]);
            break;
        case Act::Tanh:
            for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
            break;
        case Act::Gelu:
            for (std::size_t i = 0; i < n; ++i) {
                y[i] = 0.5f * x[i] * (1.0f + std::erf(x[i] * kInvSqrt2));
            }
            break;
    }

    Tape* tape = Tape::active();
    if (tape && needs_grad) {
        tape->record(
            [op, n, ad, od]() {
                if (od->grad.empty()) return;
                ensure_grad(*ad);
                const float* g = od->grad.data();
                const float* x = ad->data.data();
                const float* y = od->data.data();
                float* ga = ad->grad.data();
                switch (op) {
                    case Act::Relu:
                        for (std::size_t i = 0; i < n; ++i) ga[i] += x[i] > 0.0f ? g[i] : 0.0f;
                        break;
                    case Act::Sigmoid:
                        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * y[i] * (1.0f - y[i]);
                        break;
                    case Act::Tanh:
                        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * (1.0f - y[i] * y[i]);
                        break;
                    case Act::Gelu:
                        for (std::size_t i = 0; i < n; ++i) {
                            const float cdf = 0.5f * (1.0f + std::erf(x[i] * kInvSqrt2));
                            const float pdf = kInvSqrt2Pi * std::exp(-0.5f * x[i] * x[i]);
                            ga[i] += g[i] * (cdf + x[i] * pdf);
                        }
                        break;
                }
            },
            {ad.get()}, od.get());
    }
    return out;
}

Tensor exp_(const Tensor& a) {
    const std::size_t n = a.size();
    const bool needs_grad = a.requires_grad();
    Tensor out = make_result(a.shape(), needs_grad && Tape::active() != nullptr);
    auto ad = a.storage();
    auto od = out.storage();
    for (std::size_t i = 0; i < n; ++i) {
        // clamp keeps exp finite for any float input
        od->data[i] = std::exp(std::min(ad->data[i], 87.0f));
    }
    Tape* tape = Tape::active();
    if (tape && needs_grad) {
        tape->record(
            [n, ad, od]() {
                if (od->grad.empty()) return;
                ensure_grad(*ad);
                for (std::size_t i = 0; i < n; ++i) ad->grad[i] += od->grad[i] * od->data[i];
            },
            {ad.get()}, od.get());
    }
    return out;
}

Tensor sqrt_(const Tensor& a) {
    const std::size_t n = a.size();
    const bool needs_grad = a.requires_grad();
    Tensor out = make_result(a.shape(), needs_grad && Tape::active() != nullptr);
    auto ad = a.storage();
    auto od = out.storage();
    for (std::size_t i = 0; i < n; ++i) od->data[i] = std::sqrt(std::max(ad->data[i], 0.0f));
    Tape* tape = Tape::active();
    if (tape && needs_grad) {
        tape->record(
            [n, ad, od]() {
                if (od->grad.empty()) return;
                ensure_grad(*ad);
                for (std::size_t i = 0; i < n; ++i) {
                    ad->grad[i] += od->grad[i] * 0.5f / (od->data[i] + kDivGuard);
                }
            },
            {ad.get()}, od.get());
    }
    return out;
}

Tensor log_(const Tensor& a) {
    const std::size_t n = a.size();
    const bool needs_grad = a.requires_grad();
    Tensor out = make_result(a.shape(), needs_grad && Tape::active() != nullptr);
    auto ad = a.storage();
    auto od = out.storage();
    for (std::size_t i = 0; i < n; ++i) {
        od->data[i] = std::log(std::max(ad->data[i], 0.0f) + kDivGuard);
    }
    Tape* tape = Tape::active();
    if (tape && needs_grad) {
        tape->record(
            [n, ad, od]() {
                if (od->grad.empty()) return;
                ensure_grad(*ad);
                for (std::size_t i = 0; i < n; ++i) {
                    ad->grad[i] += od->grad[i] / (std::max(ad->data[i], 0.0f) + kDivGuard);
                }
            },
            {ad.get()}, od.get());
    }
    return out;
}

Tensor softmax(const Tensor& a, std::size_t axis) {
    const Shape& as = a.shape();
    if (axis >= as.size()) {
        throw AxisOutOfRange("axis " + std::to_string(axis) + " for shape " + shape_str(as));
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= as[i];
    for (std::size_t i = axis + 1; i < as.size(); ++i) inner *= as[i];
    const std::size_t len = as[axis];

    const bool needs_grad = a.requires_grad();
    Tensor out = make_result(as, needs_grad && Tape::active() != nullptr);
    auto ad = a.storage();
    auto od = out.storage();
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const float* x = ad->data.data() + o * len * inner + in;
            float* y = od->data.data() + o * len * inner + in;
            float mx = x[0];
            for (std::size_t l = 1; l < len; ++l) mx = std::max(mx, x[l * inner]);
            double denom = 0.0;
            for (std::size_t l = 0; l < len; ++l) {
                const float e = std::exp(x[l * inner] - mx);
                y[l * inner] = e;
                denom += e;
            }
            const float inv = static_cast<float>(1.0 / denom);
            for (std::size_t l = 0; l < len; ++l) y[l * inner] *= inv;
        }
    }

    Tape* tape = Tape::active();
    if (tape && needs_grad) {
        tape->record(
            [ad, od, outer, inner, len]() {
                if (od->grad.empty()) return;
                ensure_grad(*ad);
                for (std::size_t o = 0; o < outer; ++o) {
                    for (std::size_t in = 0; in < inner; ++in) {
                        const std::size_t base = o * len * inner + in;
                        const float* g = od->grad.data() + base;
                        const float* y = od->data.data() + base;
                        float* ga = ad->grad.data() + base;
                        double dot = 0.0;
                        for (std::size_t l = 0; l < len; ++l) {
                            dot += static_cast<double>(g[l * inner]) * y[l * inner];
                        }
                        const float d = static_cast<float>(dot);
                        for (std::size_t l = 0; l < len; ++l) {
                            ga[l * inner] += y[l * inner] * (g[l * inner] - d);
                        }
                    }
                }
            },
            {ad.get()}, od.get());
    }
    return out;
}

// ---- losses -----------------------------------------------------------------

Tensor bce_with_logits(const Tensor& logits, const Tensor& targets) {
    if (logits.shape() != targets.shape()) {
        throw ShapeMismatch("bce_with_logits " + shape_str(logits.shape()) + " vs " +
                            shape_str(targets.shape()));
    }
    const std::size_t n = logits.size();
    if (n == 0) throw ShapeMismatch("bce_with_logits on empty tensor");
    auto zd = logits.storage();
    auto td = targets.storage();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const float z = zd->data[i];
        const float t = td->data[i];
        acc += std::max(z, 0.0f) - z * t + std::log1p(std::exp(-std::abs(z)));
    }
    const bool needs_grad = logits.requires_grad() || targets.requires_grad();
    Tensor out = make_result(Shape{1}, needs_grad && Tape::active() != nullptr);
    out.values()[0] = static_cast<float>(acc / static_cast<double>(n));
    auto od = out.storage();

    Tape* tape = Tape::active();
    if (tape && needs_grad) {
        const bool zgrad = logits.requires_grad();
        const bool tgrad = targets.requires_grad();
        tape->record(
            [zd, td, od, n, zgrad, tgrad]() {
                if (od->grad.empty()) return;
                const float g = od->grad[0] / static_cast<float>(n);
                if (zgrad) ensure_grad(*zd);
                if (tgrad) ensure_grad(*td);
                for (std::size_t i = 0; i < n; ++i) {
                    const float z = zd->data[i];
                    if (zgrad) zd->grad[i] += g * (stable_sigmoid(z) - td->data[i]);
                    if (tgrad) td->grad[i] += g * -z;
                }
            },
            {zd.get(), td.get()}, od.get());
    }
    return out;
}

Tensor mse(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape()) {
        throw ShapeMismatch("mse " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
    }
    const std::size_t n = pred.size();
    if (n == 0) throw ShapeMismatch("mse on empty tensor");
    auto pd = pred.storage();
    auto td = target.storage();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(pd->data[i]) - static_cast<double>(td->data[i]);
        acc += d * d;
    }
    const bool needs_grad = pred.requires_grad() || target.requires_grad();
    Tensor out = make_result(Shape{1}, needs_grad && Tape::active() != nullptr);
    out.values()[0] = static_cast<float>(acc / static_cast<double>(n));
    auto od = out.storage();

    Tape* tape = Tape::active();
    if (tape && needs_grad) {
        const bool pgrad = pred.requires_grad();
        const bool tgrad = target.requires_grad();
        tape->record(
            [pd, td, od, n, pgrad, tgrad]() {
                if (od->grad.empty()) return;
                const float g = od->grad[0] * 2.0f / static_cast<float>(n);
                if (pgrad) ensure_grad(*pd);
                if (tgrad) ensure_grad(*td);
                for (std::size_t i = 0; i < n; ++i) {
                    const float d = pd->data[i] - td->data[i];
                    if (pgrad) pd->grad[i] += g * d;
                    if (tgrad) td->grad[i] -= g * d;
                }
            },
            {pd.get(), td.get()}, od.get());
    }
    return out;
}

Tensor loss(LossKind kind, const Tensor& pred, const Tensor& target) {
    return kind == LossKind::BceWithLogits ? bce_with_logits(pred, target) : mse(pred, target);
}

// ---- gradient checking -------------------------------------------------------

double finite_difference_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                               double eps) {
    Tensor probe(x.shape(), std::vector<float>(x.values().begin(), x.values().end()), true);
    std::vector<float> analytic;
    {
        Tape tape;
        Tensor y = f(probe);
        if (y.size() != 1) throw NotScalar("finite_difference_check needs a scalar-valued f");
        tape.backward(y);
        analytic.assign(probe.grad().begin(), probe.grad().end());
    }
    probe.clear_grad();

    double max_rel = 0.0;
    const float feps = static_cast<float>(eps);
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const float orig = probe.values()[i];
        const float xp = orig + feps;
        const float xm = orig - feps;
        probe.values()[i] = xp;
        const double fp = f(probe).item();
        probe.values()[i] = xm;
        const double fm = f(probe).item();
        probe.values()[i] = orig;
        const double numeric = (fp - fm) / (static_cast<double>(xp) - static_cast<double>(xm));
        const double rel = std::abs(analytic[i] - numeric) / (std::abs(analytic[i]) + 1e-8);
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

}  // namespace forge
