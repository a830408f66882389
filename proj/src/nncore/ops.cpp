#include "dbr/nncore/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "dbr/errors.hpp"
#include "dbr/nncore/eigen.hpp"

namespace dbr::nn {
namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                             shape_string(b.shape()));
    }
}

void accumulate(Tensor* target, const Tensor& delta) {
    if (!target) return;
    as_vector(*target) += as_vector(delta);
}

std::size_t rows_of(const Tensor& t) { return t.rank() == 1 ? 1 : t.dim(0); }
std::size_t cols_of(const Tensor& t) { return t.rank() == 1 ? t.dim(0) : t.dim(1); }

void require_matrix(const Tensor& t, const char* op) {
    if (t.rank() != 1 && t.rank() != 2) {
        throw DimensionError(std::string(op) + ": expected rank 1 or 2, got " + shape_string(t.shape()));
    }
}

struct ConvGeometry {
    std::size_t n, c, h, w;
    std::size_t k, kh, kw;
    std::size_t oh, ow;
    int stride, pad;
    bool batched;

    std::size_t patch() const { return c * kh * kw; }
    std::size_t out_pixels() const { return oh * ow; }
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& kernels, const Tensor& bias, int stride, int padding) {
    if (input.rank() != 3 && input.rank() != 4) {
        throw DimensionError("conv2d: input must be [C,H,W] or [N,C,H,W], got " + shape_string(input.shape()));
    }
    if (kernels.rank() != 4) throw DimensionError("conv2d: kernels must be [K,C,kh,kw]");
    if (stride < 1) throw DimensionError("conv2d: stride must be >= 1");
    if (padding < 0) throw DimensionError("conv2d: padding must be >= 0");
    ConvGeometry g{};
    g.batched = input.rank() == 4;
    const std::size_t off = g.batched ? 1 : 0;
    g.n = g.batched ? input.dim(0) : 1;
    g.c = input.dim(off);
    g.h = input.dim(off + 1);
    g.w = input.dim(off + 2);
    g.k = kernels.dim(0);
    g.kh = kernels.dim(2);
    g.kw = kernels.dim(3);
    g.stride = stride;
    g.pad = padding;
    if (kernels.dim(1) != g.c) {
        throw DimensionError("conv2d: input has " + std::to_string(g.c) + " channels, kernels expect " +
                             std::to_string(kernels.dim(1)));
    }
    if (bias.rank() != 1 || bias.dim(0) != g.k) throw DimensionError("conv2d: bias must be [K]");
    const std::size_t ph = g.h + 2 * static_cast<std::size_t>(padding);
    const std::size_t pw = g.w + 2 * static_cast<std::size_t>(padding);
    if (g.kh > ph || g.kw > pw) throw DimensionError("conv2d: kernel larger than padded input");
    g.oh = (ph - g.kh) / static_cast<std::size_t>(stride) + 1;
    g.ow = (pw - g.kw) / static_cast<std::size_t>(stride) + 1;
    return g;
}

// cols is [C*kh*kw x oh*ow]
void im2col(const double* image, const ConvGeometry& g, double* cols) {
    const auto opix = g.out_pixels();
    std::size_t row = 0;
    for (std::size_t ci = 0; ci < g.c; ++ci) {
        const double* plane = image + ci * g.h * g.w;
        for (std::size_t i = 0; i < g.kh; ++i) {
            for (std::size_t j = 0; j < g.kw; ++j, ++row) {
                double* out = cols + row * opix;
                for (std::size_t oy = 0; oy < g.oh; ++oy) {
                    const long y = static_cast<long>(oy) * g.stride - g.pad + static_cast<long>(i);
                    double* out_row = out + oy * g.ow;
                    if (y < 0 || y >= static_cast<long>(g.h)) {
                        std::fill(out_row, out_row + g.ow, 0.0);
                        continue;
                    }
                    const double* src = plane + static_cast<std::size_t>(y) * g.w;
                    for (std::size_t ox = 0; ox < g.ow; ++ox) {
                        const long x = static_cast<long>(ox) * g.stride - g.pad + static_cast<long>(j);
                        out_row[ox] = (x < 0 || x >= static_cast<long>(g.w)) ? 0.0 : src[x];
                    }
                }
            }
        }
    }
}

void col2im_add(const double* cols, const ConvGeometry& g, double* image) {
    const auto opix = g.out_pixels();
    std::size_t row = 0;
    for (std::size_t ci = 0; ci < g.c; ++ci) {
        double* plane = image + ci * g.h * g.w;
        for (std::size_t i = 0; i < g.kh; ++i) {
            for (std::size_t j = 0; j < g.kw; ++j, ++row) {
                const double* in = cols + row * opix;
                for (std::size_t oy = 0; oy < g.oh; ++oy) {
                    const long y = static_cast<long>(oy) * g.stride - g.pad + static_cast<long>(i);
                    if (y < 0 || y >= static_cast<long>(g.h)) continue;
                    double* dst = plane + static_cast<std::size_t>(y) * g.w;
                    const double* in_row = in + oy * g.ow;
                    for (std::size_t ox = 0; ox < g.ow; ++ox) {
                        const long x = static_cast<long>(ox) * g.stride - g.pad + static_cast<long>(j);
                        if (x >= 0 && x < static_cast<long>(g.w)) dst[x] += in_row[ox];
                    }
                }
            }
        }
    }
}

Shape conv_output_shape(const ConvGeometry& g) {
    if (g.batched) return {g.n, g.k, g.oh, g.ow};
    return {g.k, g.oh, g.ow};
}

struct PoolGeometry {
    std::size_t planes, h, w, oh, ow;
    std::size_t window, stride;
    Shape out_shape;
};

PoolGeometry pool_geometry(const Tensor& input, int window, int stride) {
    if (input.rank() != 3 && input.rank() != 4) {
        throw DimensionError("max_pool2d: input must be [C,H,W] or [N,C,H,W], got " + shape_string(input.shape()));
    }
    if (window < 1 || stride < 1) throw DimensionError("max_pool2d: window and stride must be >= 1");
    PoolGeometry g{};
    const auto r = input.rank();
    g.h = input.dim(r - 2);
    g.w = input.dim(r - 1);
    g.planes = input.size() / (g.h * g.w);
    g.window = static_cast<std::size_t>(window);
    g.stride = static_cast<std::size_t>(stride);
    if (g.window > g.h || g.window > g.w) {
        throw DimensionError("max_pool2d: window " + std::to_string(window) + " exceeds spatial extent " +
                             shape_string(input.shape()));
    }
    g.oh = (g.h - g.window) / g.stride + 1;
    g.ow = (g.w - g.window) / g.stride + 1;
    g.out_shape = input.shape();
    g.out_shape[r - 2] = g.oh;
    g.out_shape[r - 1] = g.ow;
    return g;
}

Tensor pool_forward(const Tensor& input, const PoolGeometry& g, std::vector<std::size_t>* argmax_out) {
    Tensor out(g.out_shape);
    if (argmax_out) argmax_out->resize(out.size());
    std::size_t o = 0;
    for (std::size_t p = 0; p < g.planes; ++p) {
        const std::size_t base = p * g.h * g.w;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
            for (std::size_t ox = 0; ox < g.ow; ++ox, ++o) {
                std::size_t best = base + oy * g.stride * g.w + ox * g.stride;
                double best_v = input[best];
                for (std::size_t i = 0; i < g.window; ++i) {
                    for (std::size_t j = 0; j < g.window; ++j) {
                        const std::size_t idx = base + (oy * g.stride + i) * g.w + ox * g.stride + j;
                        if (input[idx] > best_v) {
                            best_v = input[idx];
                            best = idx;
                        }
                    }
                }
                out[o] = best_v;
                if (argmax_out) (*argmax_out)[o] = best;
            }
        }
    }
    return out;
}

double apply_activation(double x, Activation kind) {
    switch (kind) {
        case Activation::relu: return x > 0.0 ? x : 0.0;
        case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case Activation::tanh: return std::tanh(x);
    }
    return x;
}

void check_dense(const Tensor& x, const Tensor& w, const Tensor& b) {
    require_matrix(x, "dense");
    if (w.rank() != 2) throw DimensionError("dense: weight must be [O x D]");
    if (b.rank() != 1 || b.dim(0) != w.dim(0)) throw DimensionError("dense: bias must be [O]");
    if (cols_of(x) != w.dim(1)) {
        throw DimensionError("dense: input width " + std::to_string(cols_of(x)) + " does not match weight " +
                             shape_string(w.shape()));
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise

Var add(Var a, Var b) {
    require_same_shape(a.value(), b.value(), "add");
    Tensor out = a.value();
    as_vector(out) += as_vector(b.value());
    return a.graph().record(std::move(out), {a, b}, [](BackwardContext& ctx) {
        accumulate(ctx.in_grad(0), ctx.out_grad());
        accumulate(ctx.in_grad(1), ctx.out_grad());
    });
}

Var mul(Var a, Var b) {
    require_same_shape(a.value(), b.value(), "mul");
    Tensor out = a.value();
    as_vector(out).array() *= as_vector(b.value()).array();
    return a.graph().record(std::move(out), {a, b}, [](BackwardContext& ctx) {
        if (auto* ga = ctx.in_grad(0)) {
            as_vector(*ga).array() += as_vector(ctx.out_grad()).array() * as_vector(ctx.in_value(1)).array();
        }
        if (auto* gb = ctx.in_grad(1)) {
            as_vector(*gb).array() += as_vector(ctx.out_grad()).array() * as_vector(ctx.in_value(0)).array();
        }
    });
}

Var scale(Var a, double factor) {
    Tensor out = a.value();
    as_vector(out) *= factor;
    return a.graph().record(std::move(out), {a}, [factor](BackwardContext& ctx) {
        if (auto* g = ctx.in_grad(0)) as_vector(*g) += factor * as_vector(ctx.out_grad());
    });
}

Var sum(Var a) {
    const double total = as_vector(a.value()).sum();
    return a.graph().record(Tensor::scalar(total), {a}, [](BackwardContext& ctx) {
        if (auto* g = ctx.in_grad(0)) as_vector(*g).array() += ctx.out_grad()[0];
    });
}

Tensor activation_forward(const Tensor& input, Activation kind) {
    Tensor out = input;
    for (auto& v : out.values()) v = apply_activation(v, kind);
    return out;
}

Var activation(Var x, Activation kind) {
    return x.graph().record(activation_forward(x.value(), kind), {x}, [kind](BackwardContext& ctx) {
        auto* g = ctx.in_grad(0);
        if (!g) return;
        const auto& dy = ctx.out_grad();
        const auto& y = ctx.out_value();
        const auto& in = ctx.in_value(0);
        for (std::size_t i = 0; i < g->size(); ++i) {
            double d = 0.0;
            switch (kind) {
                case Activation::relu: d = in[i] > 0.0 ? 1.0 : 0.0; break;
                case Activation::sigmoid: d = y[i] * (1.0 - y[i]); break;
                case Activation::tanh: d = 1.0 - y[i] * y[i]; break;
            }
            (*g)[i] += dy[i] * d;
        }
    });
}

// ---------------------------------------------------------------------------
// Linear algebra

Var matmul(Var a, Var b) {
    const auto& av = a.value();
    const auto& bv = b.value();
    if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
        throw DimensionError("matmul: incompatible " + shape_string(av.shape()) + " and " + shape_string(bv.shape()));
    }
    Tensor out({av.dim(0), bv.dim(1)});
    as_matrix(out).noalias() = as_matrix(av) * as_matrix(bv);
    return a.graph().record(std::move(out), {a, b}, [](BackwardContext& ctx) {
        const auto dy = as_matrix(ctx.out_grad());
        if (auto* ga = ctx.in_grad(0)) as_matrix(*ga).noalias() += dy * as_matrix(ctx.in_value(1)).transpose();
        if (auto* gb = ctx.in_grad(1)) as_matrix(*gb).noalias() += as_matrix(ctx.in_value(0)).transpose() * dy;
    });
}

Var linear(Var x, Var weight) {
    const auto& xv = x.value();
    const auto& wv = weight.value();
    if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(1)) {
        throw DimensionError("linear: incompatible " + shape_string(xv.shape()) + " and " + shape_string(wv.shape()));
    }
    Tensor out({xv.dim(0), wv.dim(0)});
    as_matrix(out).noalias() = as_matrix(xv) * as_matrix(wv).transpose();
    return x.graph().record(std::move(out), {x, weight}, [](BackwardContext& ctx) {
        const auto dy = as_matrix(ctx.out_grad());
        if (auto* gx = ctx.in_grad(0)) as_matrix(*gx).noalias() += dy * as_matrix(ctx.in_value(1));
        if (auto* gw = ctx.in_grad(1)) as_matrix(*gw).noalias() += dy.transpose() * as_matrix(ctx.in_value(0));
    });
}

Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
    check_dense(x, w, b);
    Tensor out = x.rank() == 1 ? Tensor({w.dim(0)}) : Tensor({x.dim(0), w.dim(0)});
    auto y = as_matrix(out, rows_of(x), w.dim(0));
    y.noalias() = as_matrix(x, rows_of(x), cols_of(x)) * as_matrix(w).transpose();
    y.rowwise() += as_vector(b).transpose();
    return out;
}

Var dense(Var x, Var weight, Var bias) {
    return x.graph().record(dense_forward(x.value(), weight.value(), bias.value()), {x, weight, bias},
                            [](BackwardContext& ctx) {
                                const auto& xv = ctx.in_value(0);
                                const auto& wv = ctx.in_value(1);
                                const auto n = rows_of(xv);
                                const auto dy = as_matrix(ctx.out_grad(), n, wv.dim(0));
                                if (auto* gx = ctx.in_grad(0)) {
                                    as_matrix(*gx, n, wv.dim(1)).noalias() += dy * as_matrix(wv);
                                }
                                if (auto* gw = ctx.in_grad(1)) {
                                    as_matrix(*gw).noalias() += dy.transpose() * as_matrix(xv, n, wv.dim(1));
                                }
                                if (auto* gb = ctx.in_grad(2)) as_vector(*gb) += dy.colwise().sum().transpose();
                            });
}

// ---------------------------------------------------------------------------
// Convolution and pooling

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias, int stride, int padding) {
    const auto g = conv_geometry(input, kernels, bias, stride, padding);
    Tensor out(conv_output_shape(g));
    RowMatrix cols(g.patch(), g.out_pixels());
    const auto kmat = as_matrix(kernels, g.k, g.patch());
    const auto in_stride = g.c * g.h * g.w;
    const auto out_stride = g.k * g.out_pixels();
    for (std::size_t n = 0; n < g.n; ++n) {
        im2col(input.data() + n * in_stride, g, cols.data());
        MatrixView y(out.data() + n * out_stride, static_cast<Eigen::Index>(g.k),
                     static_cast<Eigen::Index>(g.out_pixels()));
        y.noalias() = kmat * cols;
        y.colwise() += as_vector(bias);
    }
    return out;
}

Var conv2d(Var input, Var kernels, Var bias, int stride, int padding) {
    Tensor out = conv2d_forward(input.value(), kernels.value(), bias.value(), stride, padding);
    return input.graph().record(std::move(out), {input, kernels, bias}, [stride, padding](BackwardContext& ctx) {
        const auto& x = ctx.in_value(0);
        const auto& kv = ctx.in_value(1);
        const auto g = conv_geometry(x, kv, ctx.in_value(2), stride, padding);
        auto* gx = ctx.in_grad(0);
        auto* gk = ctx.in_grad(1);
        auto* gb = ctx.in_grad(2);
        const auto kmat = as_matrix(kv, g.k, g.patch());
        RowMatrix cols(g.patch(), g.out_pixels());
        RowMatrix dcols;
        const auto in_stride = g.c * g.h * g.w;
        const auto out_stride = g.k * g.out_pixels();
        for (std::size_t n = 0; n < g.n; ++n) {
            ConstMatrixView dy(ctx.out_grad().data() + n * out_stride, static_cast<Eigen::Index>(g.k),
                               static_cast<Eigen::Index>(g.out_pixels()));
            if (gk) {
                im2col(x.data() + n * in_stride, g, cols.data());
                as_matrix(*gk, g.k, g.patch()).noalias() += dy * cols.transpose();
            }
            if (gb) as_vector(*gb) += dy.rowwise().sum();
            if (gx) {
                dcols.noalias() = kmat.transpose() * dy;
                col2im_add(dcols.data(), g, gx->data() + n * in_stride);
            }
        }
    });
}

Tensor max_pool2d_forward(const Tensor& input, int window, int stride) {
    return pool_forward(input, pool_geometry(input, window, stride), nullptr);
}

Var max_pool2d(Var input, int window, int stride) {
    const auto g = pool_geometry(input.value(), window, stride);
    auto argmax_idx = std::make_shared<std::vector<std::size_t>>();
    Tensor out = pool_forward(input.value(), g, argmax_idx.get());
    return input.graph().record(std::move(out), {input}, [argmax_idx](BackwardContext& ctx) {
        auto* gx = ctx.in_grad(0);
        if (!gx) return;
        const auto& dy = ctx.out_grad();
        for (std::size_t o = 0; o < dy.size(); ++o) (*gx)[(*argmax_idx)[o]] += dy[o];
    });
}

// ---------------------------------------------------------------------------
// Shape plumbing

Var reshape(Var x, Shape shape) {
    return x.graph().record(x.value().reshaped(std::move(shape)), {x}, [](BackwardContext& ctx) {
        if (auto* g = ctx.in_grad(0)) as_vector(*g) += as_vector(ctx.out_grad());
    });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no inputs");
    const std::size_t n = rows_of(parts[0].value());
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (const auto& p : parts) {
        require_matrix(p.value(), "concat_cols");
        if (rows_of(p.value()) != n) throw DimensionError("concat_cols: row counts differ");
        widths.push_back(cols_of(p.value()));
        total += widths.back();
    }
    Tensor out({n, total});
    auto y = as_matrix(out);
    std::size_t c = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        y.middleCols(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(widths[i])) =
            as_matrix(parts[i].value(), n, widths[i]);
        c += widths[i];
    }
    std::vector<Var> inputs(parts.begin(), parts.end());
    return parts[0].graph().record(std::move(out), std::move(inputs), [n, widths](BackwardContext& ctx) {
        const auto dy = as_matrix(ctx.out_grad());
        std::size_t c = 0;
        for (std::size_t i = 0; i < widths.size(); ++i) {
            if (auto* g = ctx.in_grad(i)) {
                as_matrix(*g, n, widths[i]) +=
                    dy.middleCols(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(widths[i]));
            }
            c += widths[i];
        }
    });
}

Var slice_cols(Var x, std::size_t start, std::size_t count) {
    const auto& xv = x.value();
    require_matrix(xv, "slice_cols");
    const auto n = rows_of(xv);
    const auto width = cols_of(xv);
    if (count == 0 || start + count > width) throw DimensionError("slice_cols: range out of bounds");
    Tensor out({n, count});
    as_matrix(out) = as_matrix(xv, n, width).middleCols(static_cast<Eigen::Index>(start),
                                                         static_cast<Eigen::Index>(count));
    return x.graph().record(std::move(out), {x}, [n, width, start, count](BackwardContext& ctx) {
        if (auto* g = ctx.in_grad(0)) {
            as_matrix(*g, n, width).middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(count)) +=
                as_matrix(ctx.out_grad());
        }
    });
}

Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw DimensionError("concat_rows: no inputs");
    const std::size_t width = cols_of(parts[0].value());
    std::size_t total = 0;
    for (const auto& p : parts) {
        require_matrix(p.value(), "concat_rows");
        if (cols_of(p.value()) != width) throw DimensionError("concat_rows: widths differ");
        total += p.value().size();
    }
    Tensor out({total / width, width});
    std::vector<std::size_t> offsets;
    std::size_t off = 0;
    for (const auto& p : parts) {
        offsets.push_back(off);
        std::copy(p.value().data(), p.value().data() + p.value().size(), out.data() + off);
        off += p.value().size();
    }
    std::vector<Var> inputs(parts.begin(), parts.end());
    return parts[0].graph().record(std::move(out), std::move(inputs), [offsets](BackwardContext& ctx) {
        const auto& dy = ctx.out_grad();
        for (std::size_t i = 0; i < offsets.size(); ++i) {
            if (auto* g = ctx.in_grad(i)) {
                const double* src = dy.data() + offsets[i];
                for (std::size_t k = 0; k < g->size(); ++k) (*g)[k] += src[k];
            }
        }
    });
}

Var slice_rows(Var x, std::size_t start, std::size_t count) {
    const auto& xv = x.value();
    require_matrix(xv, "slice_rows");
    const auto n = rows_of(xv);
    const auto width = cols_of(xv);
    if (count == 0 || start + count > n) throw DimensionError("slice_rows: range out of bounds");
    const double* src = xv.data() + start * width;
    Tensor out({count, width}, std::vector<double>(src, src + count * width));
    return x.graph().record(std::move(out), {x}, [start, width](BackwardContext& ctx) {
        if (auto* g = ctx.in_grad(0)) {
            const auto& dy = ctx.out_grad();
            double* dst = g->data() + start * width;
            for (std::size_t k = 0; k < dy.size(); ++k) dst[k] += dy[k];
        }
    });
}

Var mean_row_blocks(Var x, std::size_t blocks) {
    const auto& xv = x.value();
    if (xv.rank() != 2 || blocks == 0 || xv.dim(0) % blocks != 0) {
        throw DimensionError("mean_row_blocks: rows must divide evenly into blocks");
    }
    const auto n = xv.dim(0) / blocks;
    const auto width = xv.dim(1);
    Tensor out({n, width});
    auto y = as_matrix(out);
    const auto in = as_matrix(xv);
    for (std::size_t b = 0; b < blocks; ++b) {
        y += in.middleRows(static_cast<Eigen::Index>(b * n), static_cast<Eigen::Index>(n));
    }
    y /= static_cast<double>(blocks);
    return x.graph().record(std::move(out), {x}, [blocks, n](BackwardContext& ctx) {
        auto* g = ctx.in_grad(0);
        if (!g) return;
        const auto dy = as_matrix(ctx.out_grad());
        auto gm = as_matrix(*g);
        for (std::size_t b = 0; b < blocks; ++b) {
            gm.middleRows(static_cast<Eigen::Index>(b * n), static_cast<Eigen::Index>(n)) +=
                dy / static_cast<double>(blocks);
        }
    });
}

// ---------------------------------------------------------------------------
// Loss

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw DimensionError("softmax: empty input");
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        z += p[i];
    }
    for (auto& v : p) v /= z;
    return p;
}

CrossEntropy softmax_cross_entropy(std::span<const double> logits, int true_class) {
    if (logits.size() < 2) throw DimensionError("softmax_cross_entropy: need at least 2 classes");
    if (true_class < 0 || static_cast<std::size_t>(true_class) >= logits.size()) {
        throw LabelError("softmax_cross_entropy: class " + std::to_string(true_class) + " outside [0," +
                         std::to_string(logits.size()) + ")");
    }
    const double m = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double v : logits) z += std::exp(v - m);
    const double log_z = std::log(z) + m;
    CrossEntropy out;
    out.loss = log_z - logits[static_cast<std::size_t>(true_class)];
    out.grad_logits = softmax(logits);
    out.grad_logits[static_cast<std::size_t>(true_class)] -= 1.0;
    return out;
}

std::size_t argmax(std::span<const double> values) {
    if (values.empty()) throw DimensionError("argmax: empty input");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
    const auto& lv = logits.value();
    require_matrix(lv, "softmax_cross_entropy");
    const auto n = rows_of(lv);
    const auto k = cols_of(lv);
    if (labels.size() != n) throw DimensionError("softmax_cross_entropy: one label per row required");
    auto grad = std::make_shared<Tensor>(lv.shape());
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        auto ce = softmax_cross_entropy(std::span<const double>(lv.data() + r * k, k), labels[r]);
        total += ce.loss;
        std::copy(ce.grad_logits.begin(), ce.grad_logits.end(), grad->data() + r * k);
    }
    as_vector(*grad) /= static_cast<double>(n);
    return logits.graph().record(Tensor::scalar(total / static_cast<double>(n)), {logits},
                                 [grad](BackwardContext& ctx) {
                                     if (auto* g = ctx.in_grad(0)) as_vector(*g) += ctx.out_grad()[0] * as_vector(*grad);
                                 });
}

}  // namespace dbr::nn
