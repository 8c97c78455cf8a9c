#include "masgan/tensor.hpp"

#include "masgan/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace masgan::nn {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw ConfigError(std::string("tensor: ") + msg);
}

} // namespace

int Graph::push(Node&& n) {
    if (n.a >= 0) n.requires_grad = n.requires_grad || nodes_[static_cast<size_t>(n.a)].requires_grad;
    if (n.b >= 0) n.requires_grad = n.requires_grad || nodes_[static_cast<size_t>(n.b)].requires_grad;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Graph::leaf(Shape shape, const double* values, bool requires_grad) {
    Node n;
    n.shape = shape;
    n.data.assign(values, values + shape.numel());
    n.requires_grad = requires_grad;
    return push(std::move(n));
}

int Graph::leaf(Shape shape, const std::vector<double>& values, bool requires_grad) {
    require(values.size() == shape.numel(), "leaf data size mismatch");
    return leaf(shape, values.data(), requires_grad);
}

int Graph::leaf_fill(Shape shape, double value, bool requires_grad) {
    Node n;
    n.shape = shape;
    n.data.assign(shape.numel(), value);
    n.requires_grad = requires_grad;
    return push(std::move(n));
}

double Graph::scalar(int i) const {
    const Node& n = nodes_[static_cast<size_t>(i)];
    require(n.shape.numel() == 1, "scalar() on non-scalar node");
    return n.data[0];
}

int Graph::binary(Op op, int a, int b) {
    const Node& na = nodes_[static_cast<size_t>(a)];
    const Node& nb = nodes_[static_cast<size_t>(b)];
    require(na.shape == nb.shape, "elementwise shape mismatch");
    Node n;
    n.shape = na.shape;
    n.op = op;
    n.a = a;
    n.b = b;
    n.data.resize(na.shape.numel());
    const size_t sz = n.data.size();
    switch (op) {
    case Op::Add:
        for (size_t i = 0; i < sz; ++i) n.data[i] = na.data[i] + nb.data[i];
        break;
    case Op::Sub:
        for (size_t i = 0; i < sz; ++i) n.data[i] = na.data[i] - nb.data[i];
        break;
    case Op::Mul:
        for (size_t i = 0; i < sz; ++i) n.data[i] = na.data[i] * nb.data[i];
        break;
    default:
        require(false, "bad binary op");
    }
    return push(std::move(n));
}

int Graph::add(int a, int b) { return binary(Op::Add, a, b); }
int Graph::sub(int a, int b) { return binary(Op::Sub, a, b); }
int Graph::mul(int a, int b) { return binary(Op::Mul, a, b); }

int Graph::neg(int a) {
    const Node& na = nodes_[static_cast<size_t>(a)];
    Node n;
    n.shape = na.shape;
    n.op = Op::Neg;
    n.a = a;
    n.data.resize(na.data.size());
    for (size_t i = 0; i < n.data.size(); ++i) n.data[i] = -na.data[i];
    return push(std::move(n));
}

int Graph::scale(int a, double k) {
    const Node& na = nodes_[static_cast<size_t>(a)];
    Node n;
    n.shape = na.shape;
    n.op = Op::Scale;
    n.a = a;
    n.x0 = k;
    n.data.resize(na.data.size());
    for (size_t i = 0; i < n.data.size(); ++i) n.data[i] = k * na.data[i];
    return push(std::move(n));
}

int Graph::add_const(int a, double k) {
    const Node& na = nodes_[static_cast<size_t>(a)];
    Node n;
    n.shape = na.shape;
    n.op = Op::AddConst;
    n.a = a;
    n.x0 = k;
    n.data.resize(na.data.size());
    for (size_t i = 0; i < n.data.size(); ++i) n.data[i] = na.data[i] + k;
    return push(std::move(n));
}

int Graph::reciprocal(int a) {
    const Node& na = nodes_[static_cast<size_t>(a)];
    Node n;
    n.shape = na.shape;
    n.op = Op::Reciprocal;
    n.a = a;
    n.data.resize(na.data.size());
    for (size_t i = 0; i < n.data.size(); ++i) n.data[i] = 1.0 / na.data[i];
    return push(std::move(n));
}

int Graph::square(int a) {
    const Node& na = nodes_[static_cast<size_t>(a)];
    Node n;
    n.shape = na.shape;
    n.op = Op::Square;
    n.a = a;
    n.data.resize(na.data.size());
    for (size_t i = 0; i < n.data.size(); ++i) n.data[i] = na.data[i] * na.data[i];
    return push(std::move(n));
}

int Graph::sqrt_(int a) {
    const Node& na = nodes_[static_cast<size_t>(a)];
    Node n;
    n.shape = na.shape;
    n.op = Op::Sqrt;
    n.a = a;
    n.data.resize(na.data.size());
    for (size_t i = 0; i < n.data.size(); ++i) n.data[i] = std::sqrt(na.data[i]);
    return push(std::move(n));
}

int Graph::exp_(int a) {
    const Node& na = nodes_[static_cast<size_t>(a)];
    Node n;
    n.shape = na.shape;
    n.op = Op::Exp;
    n.a = a;
    n.data.resize(na.data.size());
    for (size_t i = 0; i < n.data.size(); ++i) n.data[i] = std::exp(na.data[i]);
    return push(std::move(n));
}

int Graph::relu(int a) {
    const Node& na = nodes_[static_cast<size_t>(a)];
    Node n;
    n.shape = na.shape;
    n.op = Op::Relu;
    n.a = a;
    n.data.resize(na.data.size());
    for (size_t i = 0; i < n.data.size(); ++i) n.data[i] = na.data[i] > 0.0 ? na.data[i] : 0.0;
    return push(std::move(n));
}

int Graph::leaky_relu(int a, double alpha) {
    const Node& na = nodes_[static_cast<size_t>(a)];
    Node n;
    n.shape = na.shape;
    n.op = Op::LeakyRelu;
    n.a = a;
    n.x0 = alpha;
    n.data.resize(na.data.size());
    for (size_t i = 0; i < n.data.size(); ++i) n.data[i] = na.data[i] > 0.0 ? na.data[i] : alpha * na.data[i];
    return push(std::move(n));
}

int Graph::tanh_(int a) {
    const Node& na = nodes_[static_cast<size_t>(a)];
    Node n;
    n.shape = na.shape;
    n.op = Op::Tanh;
    n.a = a;
    n.data.resize(na.data.size());
    for (size_t i = 0; i < n.data.size(); ++i) n.data[i] = std::tanh(na.data[i]);
    return push(std::move(n));
}

int Graph::sigmoid_(int a) {
    const Node& na = nodes_[static_cast<size_t>(a)];
    Node n;
    n.shape = na.shape;
    n.op = Op::Sigmoid;
    n.a = a;
    n.data.resize(na.data.size());
    for (size_t i = 0; i < n.data.size(); ++i) n.data[i] = 1.0 / (1.0 + std::exp(-na.data[i]));
    return push(std::move(n));
}

int Graph::softmax_w(int a) {
    const Node& na = nodes_[static_cast<size_t>(a)];
    Node n;
    n.shape = na.shape;
    n.op = Op::SoftmaxW;
    n.a = a;
    n.data.resize(na.data.size());
    const int rows = na.shape.b * na.shape.c;
    const int w = na.shape.w;
    for (int r = 0; r < rows; ++r) {
        const double* src = na.data.data() + static_cast<size_t>(r) * w;
        double* dst = n.data.data() + static_cast<size_t>(r) * w;
        double mx = src[0];
        for (int i = 1; i < w; ++i) mx = std::max(mx, src[i]);
        double sum = 0.0;
        for (int i = 0; i < w; ++i) {
            dst[i] = std::exp(src[i] - mx);
            sum += dst[i];
        }
        const double inv = 1.0 / sum;
        for (int i = 0; i < w; ++i) dst[i] *= inv;
    }
    return push(std::move(n));
}

int Graph::matmul(int a, int b, bool trans_a, bool trans_b) {
    const Node& na = nodes_[static_cast<size_t>(a)];
    const Node& nb = nodes_[static_cast<size_t>(b)];
    require(na.shape.w == 1 && nb.shape.w == 1, "matmul expects (rows, cols, 1) operands");
    const int m = trans_a ? na.shape.c : na.shape.b;
    const int k = trans_a ? na.shape.b : na.shape.c;
    const int kb = trans_b ? nb.shape.c : nb.shape.b;
    const int p = trans_b ? nb.shape.b : nb.shape.c;
    require(k == kb, "matmul inner dimension mismatch");

    Node n;
    n.shape = Shape{m, p, 1};
    n.op = Op::MatMul;
    n.a = a;
    n.b = b;
    n.i0 = trans_a;
    n.i1 = trans_b;
    n.data.assign(static_cast<size_t>(m) * p, 0.0);

    const int lda = na.shape.c; // row stride of a
    const int ldb = nb.shape.c;
    for (int i = 0; i < m; ++i) {
        double* out = n.data.data() + static_cast<size_t>(i) * p;
        for (int kk = 0; kk < k; ++kk) {
            const double av = trans_a ? na.data[static_cast<size_t>(kk) * lda + i] : na.data[static_cast<size_t>(i) * lda + kk];
            if (av == 0.0) continue;
            const double* brow = trans_b ? nullptr : nb.data.data() + static_cast<size_t>(kk) * ldb;
            if (!trans_b) {
                for (int j = 0; j < p; ++j) out[j] += av * brow[j];
            } else {
                for (int j = 0; j < p; ++j) out[j] += av * nb.data[static_cast<size_t>(j) * ldb + kk];
            }
        }
    }
    return push(std::move(n));
}

int Graph::bmm(int a, int b, bool trans_a, bool trans_b) {
    const Node& na = nodes_[static_cast<size_t>(a)];
    const Node& nb = nodes_[static_cast<size_t>(b)];
    require(na.shape.b == nb.shape.b, "bmm batch mismatch");
    const int m = trans_a ? na.shape.w : na.shape.c;
    const int k = trans_a ? na.shape.c : na.shape.w;
    const int kb = trans_b ? nb.shape.w : nb.shape.c;
    const int p = trans_b ? nb.shape.c : nb.shape.w;
    require(k == kb, "bmm inner dimension mismatch");

    Node n;
    n.shape = Shape{na.shape.b, m, p};
    n.op = Op::Bmm;
    n.a = a;
    n.b = b;
    n.i0 = trans_a;
    n.i1 = trans_b;
    n.data.assign(n.shape.numel(), 0.0);

    const size_t a_stride = static_cast<size_t>(na.shape.c) * na.shape.w;
    const size_t b_stride = static_cast<size_t>(nb.shape.c) * nb.shape.w;
    const size_t o_stride = static_cast<size_t>(m) * p;
    for (int bb = 0; bb < na.shape.b; ++bb) {
        const double* A = na.data.data() + bb * a_stride;
        const double* B = nb.data.data() + bb * b_stride;
        double* O = n.data.data() + bb * o_stride;
        const int lda = na.shape.w;
        const int ldb = nb.shape.w;
        for (int i = 0; i < m; ++i) {
            double* out = O + static_cast<size_t>(i) * p;
            for (int kk = 0; kk < k; ++kk) {
                const double av = trans_a ? A[static_cast<size_t>(kk) * lda + i] : A[static_cast<size_t>(i) * lda + kk];
                if (av == 0.0) continue;
                if (!trans_b) {
                    const double* brow = B + static_cast<size_t>(kk) * ldb;
                    for (int j = 0; j < p; ++j) out[j] += av * brow[j];
                } else {
                    for (int j = 0; j < p; ++j) out[j] += av * B[static_cast<size_t>(j) * ldb + kk];
                }
            }
        }
    }
    return push(std::move(n));
}

namespace {

inline int conv_out_width(int w, int k, int stride, int pad) { return (w + 2 * pad - k) / stride + 1; }

} // namespace

int Graph::conv1d(int x, int kernels, int stride, int pad) {
    const Node& nx = nodes_[static_cast<size_t>(x)];
    const Node& nw = nodes_[static_cast<size_t>(kernels)];
    require(nx.shape.c == nw.shape.c, "conv1d channel mismatch");
    const int batch = nx.shape.b, ci = nx.shape.c, win = nx.shape.w;
    const int co = nw.shape.b, kw = nw.shape.w;
    const int wout = conv_out_width(win, kw, stride, pad);
    require(wout >= 1, "conv1d output width < 1");

    Node n;
    n.shape = Shape{batch, co, wout};
    n.op = Op::ConvFwd;
    n.a = x;
    n.b = kernels;
    n.i0 = stride;
    n.i1 = pad;
    n.data.assign(n.shape.numel(), 0.0);

    for (int b = 0; b < batch; ++b) {
        const double* xb = nx.data.data() + static_cast<size_t>(b) * ci * win;
        double* yb = n.data.data() + static_cast<size_t>(b) * co * wout;
        for (int o = 0; o < co; ++o) {
            const double* wo = nw.data.data() + static_cast<size_t>(o) * ci * kw;
            double* yo = yb + static_cast<size_t>(o) * wout;
            for (int i = 0; i < ci; ++i) {
                const double* xi = xb + static_cast<size_t>(i) * win;
                const double* wi = wo + static_cast<size_t>(i) * kw;
                for (int t = 0; t < wout; ++t) {
                    const int base = t * stride - pad;
                    double acc = 0.0;
                    const int k0 = base < 0 ? -base : 0;
                    const int k1 = std::min(kw, win - base);
                    for (int k = k0; k < k1; ++k) acc += xi[base + k] * wi[k];
                    yo[t] += acc;
                }
            }
        }
    }
    return push(std::move(n));
}

int Graph::conv_dx(int gy, int kernels, int stride, int pad, int input_width) {
    const Node& ng = nodes_[static_cast<size_t>(gy)];
    const Node& nw = nodes_[static_cast<size_t>(kernels)];
    const int batch = ng.shape.b, co = ng.shape.c, wout = ng.shape.w;
    const int ci = nw.shape.c, kw = nw.shape.w;
    require(nw.shape.b == co, "conv_dx kernel/grad channel mismatch");

    Node n;
    n.shape = Shape{batch, ci, input_width};
    n.op = Op::ConvDx;
    n.a = gy;
    n.b = kernels;
    n.i0 = stride;
    n.i1 = pad;
    n.i2 = input_width;
    n.data.assign(n.shape.numel(), 0.0);

    for (int b = 0; b < batch; ++b) {
        const double* gb = ng.data.data() + static_cast<size_t>(b) * co * wout;
        double* xb = n.data.data() + static_cast<size_t>(b) * ci * input_width;
        for (int o = 0; o < co; ++o) {
            const double* go = gb + static_cast<size_t>(o) * wout;
            const double* wo = nw.data.data() + static_cast<size_t>(o) * ci * kw;
            for (int i = 0; i < ci; ++i) {
                double* xi = xb + static_cast<size_t>(i) * input_width;
                const double* wi = wo + static_cast<size_t>(i) * kw;
                for (int t = 0; t < wout; ++t) {
                    const double gv = go[t];
                    if (gv == 0.0) continue;
                    const int base = t * stride - pad;
                    const int k0 = base < 0 ? -base : 0;
                    const int k1 = std::min(kw, input_width - base);
                    for (int k = k0; k < k1; ++k) xi[base + k] += gv * wi[k];
                }
            }
        }
    }
    return push(std::move(n));
}

int Graph::conv_dw(int gy, int x, int stride, int pad, int kernel_width) {
    const Node& ng = nodes_[static_cast<size_t>(gy)];
    const Node& nx = nodes_[static_cast<size_t>(x)];
    require(ng.shape.b == nx.shape.b, "conv_dw batch mismatch");
    const int batch = ng.shape.b, co = ng.shape.c, wout = ng.shape.w;
    const int ci = nx.shape.c, win = nx.shape.w;

    Node n;
    n.shape = Shape{co, ci, kernel_width};
    n.op = Op::ConvDw;
    n.a = gy;
    n.b = x;
    n.i0 = stride;
    n.i1 = pad;
    n.i2 = kernel_width;
    n.data.assign(n.shape.numel(), 0.0);

    for (int b = 0; b < batch; ++b) {
        const double* gb = ng.data.data() + static_cast<size_t>(b) * co * wout;
        const double* xb = nx.data.data() + static_cast<size_t>(b) * ci * win;
        for (int o = 0; o < co; ++o) {
            const double* go = gb + static_cast<size_t>(o) * wout;
            double* wo = n.data.data() + static_cast<size_t>(o) * ci * kernel_width;
            for (int i = 0; i < ci; ++i) {
                const double* xi = xb + static_cast<size_t>(i) * win;
                double* wi = wo + static_cast<size_t>(i) * kernel_width;
                for (int t = 0; t < wout; ++t) {
                    const double gv = go[t];
                    if (gv == 0.0) continue;
                    const int base = t * stride - pad;
                    const int k0 = base < 0 ? -base : 0;
                    const int k1 = std::min(kernel_width, win - base);
                    for (int k = k0; k < k1; ++k) wi[k] += gv * xi[base + k];
                }
            }
        }
    }
    return push(std::move(n));
}

int Graph::bias_add(int x, int bias) {
    const Node& nx = nodes_[static_cast<size_t>(x)];
    const Node& nb = nodes_[static_cast<size_t>(bias)];
    require(nb.shape.b == 1 && nb.shape.w == 1 && nb.shape.c == nx.shape.c, "bias shape must be (1,C,1)");
    Node n;
    n.shape = nx.shape;
    n.op = Op::BiasAdd;
    n.a = x;
    n.b = bias;
    n.data.resize(nx.data.size());
    const int w = nx.shape.w;
    size_t idx = 0;
    for (int b = 0; b < nx.shape.b; ++b)
        for (int c = 0; c < nx.shape.c; ++c) {
            const double bv = nb.data[static_cast<size_t>(c)];
            for (int i = 0; i < w; ++i, ++idx) n.data[idx] = nx.data[idx] + bv;
        }
    return push(std::move(n));
}

int Graph::reduce_bw(int a) {
    const Node& na = nodes_[static_cast<size_t>(a)];
    Node n;
    n.shape = Shape{1, na.shape.c, 1};
    n.op = Op::ReduceBW;
    n.a = a;
    n.data.assign(static_cast<size_t>(na.shape.c), 0.0);
    size_t idx = 0;
    for (int b = 0; b < na.shape.b; ++b)
        for (int c = 0; c < na.shape.c; ++c)
            for (int i = 0; i < na.shape.w; ++i, ++idx) n.data[static_cast<size_t>(c)] += na.data[idx];
    return push(std::move(n));
}

int Graph::bcast_bw(int a, int batch, int width) {
    const Node& na = nodes_[static_cast<size_t>(a)];
    require(na.shape.b == 1 && na.shape.w == 1, "bcast_bw expects (1,C,1)");
    Node n;
    n.shape = Shape{batch, na.shape.c, width};
    n.op = Op::BcastBW;
    n.a = a;
    n.data.resize(n.shape.numel());
    size_t idx = 0;
    for (int b = 0; b < batch; ++b)
        for (int c = 0; c < na.shape.c; ++c) {
            const double v = na.data[static_cast<size_t>(c)];
            for (int i = 0; i < width; ++i, ++idx) n.data[idx] = v;
        }
    return push(std::move(n));
}

int Graph::reduce_w(int a) {
    const Node& na = nodes_[static_cast<size_t>(a)];
    Node n;
    n.shape = Shape{na.shape.b, na.shape.c, 1};
    n.op = Op::ReduceW;
    n.a = a;
    n.data.assign(n.shape.numel(), 0.0);
    const int rows = na.shape.b * na.shape.c;
    for (int r = 0; r < rows; ++r) {
        const double* src = na.data.data() + static_cast<size_t>(r) * na.shape.w;
        double acc = 0.0;
        for (int i = 0; i < na.shape.w; ++i) acc += src[i];
        n.data[static_cast<size_t>(r)] = acc;
    }
    return push(std::move(n));
}

int Graph::bcast_w(int a, int width) {
    const Node& na = nodes_[static_cast<size_t>(a)];
    require(na.shape.w == 1, "bcast_w expects (B,C,1)");
    Node n;
    n.shape = Shape{na.shape.b, na.shape.c, width};
    n.op = Op::BcastW;
    n.a = a;
    n.data.resize(n.shape.numel());
    const int rows = na.shape.b * na.shape.c;
    for (int r = 0; r < rows; ++r) {
        const double v = na.data[static_cast<size_t>(r)];
        double* dst = n.data.data() + static_cast<size_t>(r) * width;
        for (int i = 0; i < width; ++i) dst[i] = v;
    }
    return push(std::move(n));
}

int Graph::reduce_cw(int a) {
    const Node& na = nodes_[static_cast<size_t>(a)];
    Node n;
    n.shape = Shape{na.shape.b, 1, 1};
    n.op = Op::ReduceCW;
    n.a = a;
    n.data.assign(static_cast<size_t>(na.shape.b), 0.0);
    const size_t per = static_cast<size_t>(na.shape.c) * na.shape.w;
    for (int b = 0; b < na.shape.b; ++b) {
        const double* src = na.data.data() + b * per;
        double acc = 0.0;
        for (size_t i = 0; i < per; ++i) acc += src[i];
        n.data[static_cast<size_t>(b)] = acc;
    }
    return push(std::move(n));
}

int Graph::bcast_cw(int a, int channels, int width) {
    const Node& na = nodes_[static_cast<size_t>(a)];
    require(na.shape.c == 1 && na.shape.w == 1, "bcast_cw expects (B,1,1)");
    Node n;
    n.shape = Shape{na.shape.b, channels, width};
    n.op = Op::BcastCW;
    n.a = a;
    n.data.resize(n.shape.numel());
    const size_t per = static_cast<size_t>(channels) * width;
    for (int b = 0; b < na.shape.b; ++b) {
        const double v = na.data[static_cast<size_t>(b)];
        double* dst = n.data.data() + b * per;
        for (size_t i = 0; i < per; ++i) dst[i] = v;
    }
    return push(std::move(n));
}

int Graph::sum_all(int a) {
    const Node& na = nodes_[static_cast<size_t>(a)];
    Node n;
    n.shape = Shape{1, 1, 1};
    n.op = Op::SumAll;
    n.a = a;
    double acc = 0.0;
    for (double v : na.data) acc += v;
    n.data.assign(1, acc);
    return push(std::move(n));
}

int Graph::bcast_all(int a, Shape target) {
    const Node& na = nodes_[static_cast<size_t>(a)];
    require(na.shape.numel() == 1, "bcast_all expects a scalar");
    Node n;
    n.shape = target;
    n.op = Op::BcastAll;
    n.a = a;
    n.data.assign(target.numel(), na.data[0]);
    return push(std::move(n));
}

int Graph::mul_rowb(int x, int s) {
    const Node& nx = nodes_[static_cast<size_t>(x)];
    const Node& ns = nodes_[static_cast<size_t>(s)];
    require(ns.shape.b == nx.shape.b && ns.shape.c == 1 && ns.shape.w == 1, "mul_rowb scale must be (B,1,1)");
    Node n;
    n.shape = nx.shape;
    n.op = Op::MulRowB;
    n.a = x;
    n.b = s;
    n.data.resize(nx.data.size());
    const size_t per = static_cast<size_t>(nx.shape.c) * nx.shape.w;
    for (int b = 0; b < nx.shape.b; ++b) {
        const double sv = ns.data[static_cast<size_t>(b)];
        const double* src = nx.data.data() + b * per;
        double* dst = n.data.data() + b * per;
        for (size_t i = 0; i < per; ++i) dst[i] = src[i] * sv;
    }
    return push(std::move(n));
}

int Graph::mul_scalar_node(int x, int s) {
    const Node& nx = nodes_[static_cast<size_t>(x)];
    const Node& ns = nodes_[static_cast<size_t>(s)];
    require(ns.shape.numel() == 1, "mul_scalar_node scale must be a scalar node");
    Node n;
    n.shape = nx.shape;
    n.op = Op::MulScalarNode;
    n.a = x;
    n.b = s;
    n.data.resize(nx.data.size());
    const double sv = ns.data[0];
    for (size_t i = 0; i < n.data.size(); ++i) n.data[i] = nx.data[i] * sv;
    return push(std::move(n));
}

int Graph::reshape(int a, int channels, int width) {
    const Node& na = nodes_[static_cast<size_t>(a)];
    require(static_cast<size_t>(channels) * width == static_cast<size_t>(na.shape.c) * na.shape.w,
            "reshape element count mismatch");
    Node n;
    n.shape = Shape{na.shape.b, channels, width};
    n.op = Op::Reshape;
    n.a = a;
    n.i0 = na.shape.c;
    n.i1 = na.shape.w;
    n.data = na.data;
    return push(std::move(n));
}

std::vector<int> Graph::backward(int output, const std::vector<int>& wrt) {
    require(nodes_[static_cast<size_t>(output)].shape.numel() == 1, "backward output must be scalar");

    // need[i]: some wrt node is reachable from i through parent edges
    std::vector<char> need(nodes_.size(), 0);
    for (int w : wrt) need[static_cast<size_t>(w)] = 1;
    for (size_t i = 0; i <= static_cast<size_t>(output); ++i) {
        if (need[i]) continue;
        const Node& n = nodes_[i];
        if ((n.a >= 0 && need[static_cast<size_t>(n.a)]) || (n.b >= 0 && need[static_cast<size_t>(n.b)])) need[i] = 1;
    }

    std::vector<int> grad(nodes_.size(), -1);
    grad[static_cast<size_t>(output)] = leaf_fill(Shape{1, 1, 1}, 1.0);

    const auto accumulate = [&](int target, int contribution) {
        if (grad[static_cast<size_t>(target)] < 0)
            grad[static_cast<size_t>(target)] = contribution;
        else
            grad[static_cast<size_t>(target)] = add(grad[static_cast<size_t>(target)], contribution);
    };

    for (int i = output; i >= 0; --i) {
        const int gi = grad[static_cast<size_t>(i)];
        if (gi < 0 || !need[static_cast<size_t>(i)]) continue;
        // snapshot fields; `nodes_` may reallocate while emitting grad nodes
        const Op op = nodes_[static_cast<size_t>(i)].op;
        const int a = nodes_[static_cast<size_t>(i)].a;
        const int b = nodes_[static_cast<size_t>(i)].b;
        const int i0 = nodes_[static_cast<size_t>(i)].i0;
        const int i1 = nodes_[static_cast<size_t>(i)].i1;
        const double x0 = nodes_[static_cast<size_t>(i)].x0;
        const auto needs = [&](int p) { return p >= 0 && need[static_cast<size_t>(p)]; };

        switch (op) {
        case Op::Leaf:
            break;
        case Op::Add:
            if (needs(a)) accumulate(a, gi);
            if (needs(b)) accumulate(b, gi);
            break;
        case Op::Sub:
            if (needs(a)) accumulate(a, gi);
            if (needs(b)) accumulate(b, neg(gi));
            break;
        case Op::Mul:
            if (needs(a)) accumulate(a, mul(gi, b));
            if (needs(b)) accumulate(b, mul(gi, a));
            break;
        case Op::Neg:
            if (needs(a)) accumulate(a, neg(gi));
            break;
        case Op::Scale:
            if (needs(a)) accumulate(a, scale(gi, x0));
            break;
        case Op::AddConst:
            if (needs(a)) accumulate(a, gi);
            break;
        case Op::Reciprocal:
            if (needs(a)) accumulate(a, neg(mul(gi, square(i))));
            break;
        case Op::Square:
            if (needs(a)) accumulate(a, scale(mul(gi, a), 2.0));
            break;
        case Op::Sqrt:
            if (needs(a)) accumulate(a, scale(mul(gi, reciprocal(i)), 0.5));
            break;
        case Op::Exp:
            if (needs(a)) accumulate(a, mul(gi, i));
            break;
        case Op::Relu:
            if (needs(a)) {
                const Node& na = nodes_[static_cast<size_t>(a)];
                std::vector<double> mask(na.data.size());
                for (size_t k = 0; k < mask.size(); ++k) mask[k] = na.data[k] > 0.0 ? 1.0 : 0.0;
                accumulate(a, mul(gi, leaf(na.shape, mask)));
            }
            break;
        case Op::LeakyRelu:
            if (needs(a)) {
                const Node& na = nodes_[static_cast<size_t>(a)];
                std::vector<double> mask(na.data.size());
                for (size_t k = 0; k < mask.size(); ++k) mask[k] = na.data[k] > 0.0 ? 1.0 : x0;
                accumulate(a, mul(gi, leaf(na.shape, mask)));
            }
            break;
        case Op::Tanh:
            if (needs(a)) accumulate(a, mul(gi, add_const(scale(square(i), -1.0), 1.0)));
            break;
        case Op::Sigmoid:
            if (needs(a)) accumulate(a, mul(gi, mul(i, add_const(scale(i, -1.0), 1.0))));
            break;
        case Op::SoftmaxW:
            if (needs(a)) {
                // g_x = y * (g - rowsum(g * y))
                const int gy_times_y = mul(gi, i);
                const int rowsum = bcast_w(reduce_w(gy_times_y), nodes_[static_cast<size_t>(i)].shape.w);
                accumulate(a, mul(i, sub(gi, rowsum)));
            }
            break;
        case Op::MatMul: {
            const bool ta = i0 != 0, tb = i1 != 0;
            if (needs(a)) {
                if (!ta)
                    accumulate(a, matmul(gi, b, false, !tb));
                else
                    accumulate(a, tb ? matmul(b, gi, true, true) : matmul(b, gi, false, true));
            }
            if (needs(b)) {
                if (!tb)
                    accumulate(b, ta ? matmul(a, gi, false, false) : matmul(a, gi, true, false));
                else
                    accumulate(b, ta ? matmul(gi, a, true, true) : matmul(gi, a, true, false));
            }
            break;
        }
        case Op::Bmm: {
            const bool ta = i0 != 0, tb = i1 != 0;
            if (needs(a)) {
                if (!ta)
                    accumulate(a, bmm(gi, b, false, !tb));
                else
                    accumulate(a, tb ? bmm(b, gi, true, true) : bmm(b, gi, false, true));
            }
            if (needs(b)) {
                if (!tb)
                    accumulate(b, ta ? bmm(a, gi, false, false) : bmm(a, gi, true, false));
                else
                    accumulate(b, ta ? bmm(gi, a, true, true) : bmm(gi, a, true, false));
            }
            break;
        }
        case Op::ConvFwd: {
            const int input_width = nodes_[static_cast<size_t>(a)].shape.w;
            const int kernel_width = nodes_[static_cast<size_t>(b)].shape.w;
            if (needs(a)) accumulate(a, conv_dx(gi, b, i0, i1, input_width));
            if (needs(b)) accumulate(b, conv_dw(gi, a, i0, i1, kernel_width));
            break;
        }
        case Op::ConvDx: {
            const int kernel_width = nodes_[static_cast<size_t>(b)].shape.w;
            if (needs(a)) accumulate(a, conv1d(gi, b, i0, i1));
            if (needs(b)) accumulate(b, conv_dw(a, gi, i0, i1, kernel_width));
            break;
        }
        case Op::ConvDw: {
            const int input_width = nodes_[static_cast<size_t>(b)].shape.w;
            if (needs(a)) accumulate(a, conv1d(b, gi, i0, i1));
            if (needs(b)) accumulate(b, conv_dx(a, gi, i0, i1, input_width));
            break;
        }
        case Op::BiasAdd:
            if (needs(a)) accumulate(a, gi);
            if (needs(b)) accumulate(b, reduce_bw(gi));
            break;
        case Op::ReduceBW: {
            const Shape& in = nodes_[static_cast<size_t>(a)].shape;
            if (needs(a)) accumulate(a, bcast_bw(gi, in.b, in.w));
            break;
        }
        case Op::BcastBW:
            if (needs(a)) accumulate(a, reduce_bw(gi));
            break;
        case Op::ReduceW:
            if (needs(a)) accumulate(a, bcast_w(gi, nodes_[static_cast<size_t>(a)].shape.w));
            break;
        case Op::BcastW:
            if (needs(a)) accumulate(a, reduce_w(gi));
            break;
        case Op::ReduceCW: {
            const Shape& in = nodes_[static_cast<size_t>(a)].shape;
            if (needs(a)) accumulate(a, bcast_cw(gi, in.c, in.w));
            break;
        }
        case Op::BcastCW:
            if (needs(a)) accumulate(a, reduce_cw(gi));
            break;
        case Op::SumAll:
            if (needs(a)) accumulate(a, bcast_all(gi, nodes_[static_cast<size_t>(a)].shape));
            break;
        case Op::BcastAll:
            if (needs(a)) accumulate(a, sum_all(gi));
            break;
        case Op::MulRowB:
            if (needs(a)) accumulate(a, mul_rowb(gi, b));
            if (needs(b)) accumulate(b, reduce_cw(mul(gi, a)));
            break;
        case Op::MulScalarNode:
            if (needs(a)) accumulate(a, mul_scalar_node(gi, b));
            if (needs(b)) accumulate(b, sum_all(mul(gi, a)));
            break;
        case Op::Reshape:
            if (needs(a)) accumulate(a, reshape(gi, i0, i1));
            break;
        }
    }

    std::vector<int> out;
    out.reserve(wrt.size());
    for (int w : wrt) out.push_back(grad[static_cast<size_t>(w)]);
    return out;
}

} // namespace masgan::nn
