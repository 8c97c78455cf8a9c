#pragma once
#include <cstdint>
#include <vector>

namespace masgan::nn {

// (batch, channels, width) row-major. Flat vectors are (b, n, 1); 2-D
// parameter matrices are (rows, cols, 1).
struct Shape {
    int b = 1;
    int c = 1;
    int w = 1;

    size_t numel() const { return static_cast<size_t>(b) * c * w; }
    bool operator==(const Shape&) const = default;
};

enum class Op : uint8_t {
    Leaf,
    Add,
    Sub,
    Mul,
    Neg,
    Scale,      // x * k
    AddConst,   // x + k
    Reciprocal, // 1 / x
    Square,
    Sqrt,
    Exp,
    Relu,
    LeakyRelu,
    Tanh,
    Sigmoid,
    SoftmaxW, // softmax over w per (b, c) row
    MatMul,   // (m,k,1) x (k,n,1) -> (m,n,1), trans flags in i0/i1
    Bmm,      // (B,m,k) x (B,k,n) -> (B,m,n), trans flags in i0/i1
    ConvFwd,  // x (B,Ci,W), kernels (Co,Ci,K) -> (B,Co,Wout); i0=stride, i1=pad
    ConvDx,   // gy (B,Co,Wo), kernels -> (B,Ci,W); i2 = target input width
    ConvDw,   // gy (B,Co,Wo), x (B,Ci,W) -> (Co,Ci,K); i2 = kernel width
    BiasAdd,  // x (B,C,W) + bias (1,C,1)
    ReduceBW, // (B,C,W) -> (1,C,1)
    BcastBW,  // (1,C,1) -> (B,C,W)
    ReduceW,  // (B,C,W) -> (B,C,1)
    BcastW,   // (B,C,1) -> (B,C,W)
    ReduceCW, // (B,C,W) -> (B,1,1)
    BcastCW,  // (B,1,1) -> (B,C,W)
    SumAll,   // -> (1,1,1)
    BcastAll, // (1,1,1) -> target
    MulRowB,  // x (B,C,W) * s (B,1,1), broadcast per sample
    MulScalarNode, // x * s, s a (1,1,1) node
    Reshape,
};

struct Node {
    Shape shape;
    std::vector<double> data;
    Op op = Op::Leaf;
    int a = -1;
    int b = -1;
    int i0 = 0, i1 = 0, i2 = 0;
    double x0 = 0.0;
    bool requires_grad = false;
};

// Append-only tape with eager value evaluation. backward() emits gradient
// nodes onto the same tape using only tape ops, so a second backward pass
// through a computed gradient (the gradient penalty) is exact.
class Graph {
public:
    int leaf(Shape shape, const double* values, bool requires_grad = false);
    int leaf(Shape shape, const std::vector<double>& values, bool requires_grad = false);
    int leaf_fill(Shape shape, double value, bool requires_grad = false);

    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);
    int neg(int a);
    int scale(int a, double k);
    int add_const(int a, double k);
    int reciprocal(int a);
    int square(int a);
    int sqrt_(int a);
    int exp_(int a);
    int relu(int a);
    int leaky_relu(int a, double alpha);
    int tanh_(int a);
    int sigmoid_(int a);
    int softmax_w(int a);
    int matmul(int a, int b, bool trans_a = false, bool trans_b = false);
    int bmm(int a, int b, bool trans_a = false, bool trans_b = false);
    int conv1d(int x, int kernels, int stride, int pad);
    int conv_dx(int gy, int kernels, int stride, int pad, int input_width);
    int conv_dw(int gy, int x, int stride, int pad, int kernel_width);
    int bias_add(int x, int bias);
    int reduce_bw(int a);
    int bcast_bw(int a, int batch, int width);
    int reduce_w(int a);
    int bcast_w(int a, int width);
    int reduce_cw(int a);
    int bcast_cw(int a, int channels, int width);
    int sum_all(int a);
    int bcast_all(int a, Shape target);
    int mul_rowb(int x, int s);
    int mul_scalar_node(int x, int s);
    int reshape(int a, int channels, int width);

    // Gradients of scalar node `output` w.r.t. each node in `wrt`; entries are
    // node ids (or -1 where no gradient path exists). Only subgraphs reaching
    // a wrt node are traversed.
    std::vector<int> backward(int output, const std::vector<int>& wrt);

    const Node& node(int i) const { return nodes_[static_cast<size_t>(i)]; }
    double scalar(int i) const; // value of a 1-element node
    size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

private:
    int push(Node&& n);
    int binary(Op op, int a, int b);

    std::vector<Node> nodes_;
};

} // namespace masgan::nn
