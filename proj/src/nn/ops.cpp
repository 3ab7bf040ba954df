#include "vfr/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "vfr/error.hpp"

namespace vfr::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;

void require_same(const Var& a, const Var& b, const char* op) {
    require(a.shape() == b.shape(), ErrorCode::invalid_input,
            std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
}

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

template <typename Fn>
Var unary(const Var& x, Fn&& f, std::function<void(Node&)> backward) {
    Tensor out(x.shape());
    const auto in = x.value().data();
    auto dst = out.data();
    for (std::size_t i = 0; i < in.size(); ++i) dst[i] = f(in[i]);
    return make_op(std::move(out), {x}, std::move(backward));
}

struct BilinearTap {
    int i0;
    int i1;
    double w1;  // weight of i1; i0 gets 1 - w1
};

std::vector<BilinearTap> bilinear_taps(int in, int out) {
    std::vector<BilinearTap> taps(out);
    const double s = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
        const double f = std::clamp((o + 0.5) * s - 0.5, 0.0, in - 1.0);
        const int i0 = static_cast<int>(std::floor(f));
        taps[o] = {i0, std::min(i0 + 1, in - 1), f - i0};
    }
    return taps;
}

}  // namespace

Var add(const Var& a, const Var& b) {
    require_same(a, b, "add");
    Tensor out = a.value();
    auto dst = out.data();
    const auto rhs = b.value().data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += rhs[i];
    return make_op(std::move(out), {a, b}, [](Node& self) {
        for (std::size_t p = 0; p < 2; ++p) {
            Node& in = parent(self, p);
            if (!in.requires_grad) continue;
            auto g = in.grad_buffer().data();
            const auto go = self.grad.data();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i];
        }
    });
}

Var sub(const Var& a, const Var& b) {
    require_same(a, b, "sub");
    Tensor out = a.value();
    auto dst = out.data();
    const auto rhs = b.value().data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= rhs[i];
    return make_op(std::move(out), {a, b}, [](Node& self) {
        for (std::size_t p = 0; p < 2; ++p) {
            Node& in = parent(self, p);
            if (!in.requires_grad) continue;
            const double sign = p == 0 ? 1.0 : -1.0;
            auto g = in.grad_buffer().data();
            const auto go = self.grad.data();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * go[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    require_same(a, b, "mul");
    Tensor out = a.value();
    auto dst = out.data();
    const auto rhs = b.value().data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] *= rhs[i];
    return make_op(std::move(out), {a, b}, [](Node& self) {
        Node& na = parent(self, 0);
        Node& nb = parent(self, 1);
        const auto go = self.grad.data();
        if (na.requires_grad) {
            auto g = na.grad_buffer().data();
            const auto other = nb.value.data();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i] * other[i];
        }
        if (nb.requires_grad) {
            auto g = nb.grad_buffer().data();
            const auto other = na.value.data();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i] * other[i];
        }
    });
}

Var scale(const Var& a, double s) {
    return unary(a, [s](double v) { return v * s; }, [s](Node& self) {
        auto g = parent(self, 0).grad_buffer().data();
        const auto go = self.grad.data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * go[i];
    });
}

Var add_scalar(const Var& a, double s) {
    return unary(a, [s](double v) { return v + s; }, [](Node& self) {
        auto g = parent(self, 0).grad_buffer().data();
        const auto go = self.grad.data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i];
    });
}

Var mul_mask(const Var& x, const Var& mask) {
    const Shape xs = x.shape();
    const Shape ms = mask.shape();
    require(ms.c == 1 && ms.n == xs.n && ms.h == xs.h && ms.w == xs.w, ErrorCode::invalid_input,
            "mul_mask: mask " + ms.str() + " incompatible with " + xs.str());
    Tensor out = x.value();
    for (int n = 0; n < xs.n; ++n) {
        const double* m = mask.value().plane(n, 0);
        for (int c = 0; c < xs.c; ++c) {
            double* d = out.plane(n, c);
            for (std::size_t i = 0; i < xs.plane(); ++i) d[i] *= m[i];
        }
    }
    return make_op(std::move(out), {x, mask}, [xs](Node& self) {
        Node& nx = parent(self, 0);
        Node& nm = parent(self, 1);
        for (int n = 0; n < xs.n; ++n) {
            const double* m = nm.value.plane(n, 0);
            for (int c = 0; c < xs.c; ++c) {
                const double* go = self.grad.plane(n, c);
                if (nx.requires_grad) {
                    double* g = nx.grad_buffer().plane(n, c);
                    for (std::size_t i = 0; i < xs.plane(); ++i) g[i] += go[i] * m[i];
                }
                if (nm.requires_grad) {
                    double* g = nm.grad_buffer().plane(n, 0);
                    const double* xv = nx.value.plane(n, c);
                    for (std::size_t i = 0; i < xs.plane(); ++i) g[i] += go[i] * xv[i];
                }
            }
        }
    });
}

Var scale_channels(const Var& x, std::vector<double> factors) {
    const Shape xs = x.shape();
    require(static_cast<int>(factors.size()) == xs.c, ErrorCode::invalid_input, "scale_channels: factor count");
    Tensor out = x.value();
    for (int n = 0; n < xs.n; ++n) {
        for (int c = 0; c < xs.c; ++c) {
            double* d = out.plane(n, c);
            for (std::size_t i = 0; i < xs.plane(); ++i) d[i] *= factors[c];
        }
    }
    return make_op(std::move(out), {x}, [xs, factors = std::move(factors)](Node& self) {
        Tensor& g = parent(self, 0).grad_buffer();
        for (int n = 0; n < xs.n; ++n) {
            for (int c = 0; c < xs.c; ++c) {
                double* d = g.plane(n, c);
                const double* go = self.grad.plane(n, c);
                for (std::size_t i = 0; i < xs.plane(); ++i) d[i] += factors[c] * go[i];
            }
        }
    });
}

Var leaky_relu(const Var& x, double slope) {
    return unary(x, [slope](double v) { return v > 0 ? v : slope * v; }, [slope](Node& self) {
        Node& in = parent(self, 0);
        auto g = in.grad_buffer().data();
        const auto go = self.grad.data();
        const auto xv = in.value.data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += xv[i] > 0 ? go[i] : slope * go[i];
    });
}

Var relu(const Var& x) { return leaky_relu(x, 0.0); }

Var tanh(const Var& x) {
    return unary(x, [](double v) { return std::tanh(v); }, [](Node& self) {
        auto g = parent(self, 0).grad_buffer().data();
        const auto go = self.grad.data();
        const auto y = self.value.data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i] * (1.0 - y[i] * y[i]);
    });
}

Var sigmoid(const Var& x) {
    return unary(x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); }, [](Node& self) {
        auto g = parent(self, 0).grad_buffer().data();
        const auto go = self.grad.data();
        const auto y = self.value.data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i] * y[i] * (1.0 - y[i]);
    });
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad) {
    const Shape xs = x.shape();
    const Shape ws = weight.shape();
    require(ws.c == xs.c && ws.h == ws.w, ErrorCode::invalid_input,
            "conv2d: weight " + ws.str() + " incompatible with input " + xs.str());
    require(stride >= 1 && pad >= 0, ErrorCode::invalid_input, "conv2d: bad stride/pad");
    const int k = ws.h;
    const int cout = ws.n;
    const int ho = (xs.h + 2 * pad - k) / stride + 1;
    const int wo = (xs.w + 2 * pad - k) / stride + 1;
    require(ho > 0 && wo > 0, ErrorCode::invalid_input, "conv2d: input " + xs.str() + " smaller than kernel");
    const bool has_bias = bias.defined();
    if (has_bias) {
        require(bias.shape().numel() == static_cast<std::size_t>(cout), ErrorCode::invalid_input, "conv2d: bias size");
    }

    const int K = xs.c * k * k;
    const int P = ho * wo;
    const bool direct = k == 1 && stride == 1 && pad == 0;
    auto cols = std::make_shared<std::vector<double>>(direct ? 0 : static_cast<std::size_t>(xs.n) * K * P);

    Tensor out(Shape{xs.n, cout, ho, wo});
    const MapConstMat W(weight.value().data().data(), cout, K);
    for (int n = 0; n < xs.n; ++n) {
        const double* colp = nullptr;
        if (direct) {
            colp = x.value().plane(n, 0);
        } else {
            double* dst = cols->data() + static_cast<std::size_t>(n) * K * P;
            for (int ci = 0; ci < xs.c; ++ci) {
                const double* src = x.value().plane(n, ci);
                for (int ky = 0; ky < k; ++ky) {
                    for (int kx = 0; kx < k; ++kx) {
                        double* row = dst + static_cast<std::size_t>((ci * k + ky) * k + kx) * P;
                        for (int oy = 0; oy < ho; ++oy) {
                            const int iy = oy * stride - pad + ky;
                            double* r = row + oy * wo;
                            if (iy < 0 || iy >= xs.h) {
                                std::fill(r, r + wo, 0.0);
                                continue;
                            }
                            const double* s = src + static_cast<std::size_t>(iy) * xs.w;
                            for (int ox = 0; ox < wo; ++ox) {
                                const int ix = ox * stride - pad + kx;
                                r[ox] = (ix < 0 || ix >= xs.w) ? 0.0 : s[ix];
                            }
                        }
                    }
                }
            }
            colp = dst;
        }
        MapMat O(out.plane(n, 0), cout, P);
        O.noalias() = W * MapConstMat(colp, K, P);
        if (has_bias) {
            const Eigen::Map<const Eigen::VectorXd> b(bias.value().data().data(), cout);
            O.colwise() += b;
        }
    }

    std::vector<Var> parents{x, weight};
    if (has_bias) parents.push_back(bias);
    return make_op(std::move(out), parents, [=](Node& self) {
        Node& nx = parent(self, 0);
        Node& nw = parent(self, 1);
        Node* nb = has_bias ? &parent(self, 2) : nullptr;
        const MapConstMat Wm(nw.value.data().data(), cout, K);
        RowMat dcols;
        for (int n = 0; n < xs.n; ++n) {
            const MapConstMat G(self.grad.plane(n, 0), cout, P);
            const double* colp =
                direct ? nx.value.plane(n, 0) : cols->data() + static_cast<std::size_t>(n) * K * P;
            if (nw.requires_grad) {
                MapMat dW(nw.grad_buffer().data().data(), cout, K);
                dW.noalias() += G * MapConstMat(colp, K, P).transpose();
            }
            if (nb && nb->requires_grad) {
                Eigen::Map<Eigen::VectorXd> db(nb->grad_buffer().data().data(), cout);
                db += G.rowwise().sum();
            }
            if (!nx.requires_grad) continue;
            if (direct) {
                MapMat dx(nx.grad_buffer().plane(n, 0), K, P);
                dx.noalias() += Wm.transpose() * G;
                continue;
            }
            dcols.noalias() = Wm.transpose() * G;
            for (int ci = 0; ci < xs.c; ++ci) {
                double* gx = nx.grad_buffer().plane(n, ci);
                for (int ky = 0; ky < k; ++ky) {
                    for (int kx = 0; kx < k; ++kx) {
                        const double* row = dcols.data() + static_cast<std::size_t>((ci * k + ky) * k + kx) * P;
                        for (int oy = 0; oy < ho; ++oy) {
                            const int iy = oy * stride - pad + ky;
                            if (iy < 0 || iy >= xs.h) continue;
                            double* d = gx + static_cast<std::size_t>(iy) * xs.w;
                            const double* r = row + oy * wo;
                            for (int ox = 0; ox < wo; ++ox) {
                                const int ix = ox * stride - pad + kx;
                                if (ix >= 0 && ix < xs.w) d[ix] += r[ox];
                            }
                        }
                    }
                }
            }
        }
    });
}

Var concat(const std::vector<Var>& parts) {
    require(!parts.empty(), ErrorCode::invalid_input, "concat of nothing");
    Shape s = parts.front().shape();
    int channels = 0;
    for (const Var& p : parts) {
        const Shape& ps = p.shape();
        require(ps.n == s.n && ps.h == s.h && ps.w == s.w, ErrorCode::invalid_input,
                "concat: " + ps.str() + " incompatible with " + s.str());
        channels += ps.c;
    }
    s.c = channels;
    Tensor out(s);
    std::vector<int> offsets;
    for (int n = 0; n < s.n; ++n) {
        int c0 = 0;
        for (const Var& p : parts) {
            const Shape& ps = p.shape();
            std::copy_n(p.value().plane(n, 0), ps.c * ps.plane(), out.plane(n, c0));
            c0 += ps.c;
        }
    }
    return make_op(std::move(out), parts, [s](Node& self) {
        for (int n = 0; n < s.n; ++n) {
            int c0 = 0;
            for (std::size_t i = 0; i < self.parents.size(); ++i) {
                Node& p = parent(self, i);
                const int pc = p.value.shape().c;
                if (p.requires_grad) {
                    double* g = p.grad_buffer().plane(n, 0);
                    const double* go = self.grad.plane(n, c0);
                    for (std::size_t j = 0; j < pc * s.plane(); ++j) g[j] += go[j];
                }
                c0 += pc;
            }
        }
    });
}

Var slice_channels(const Var& x, int start, int count) {
    const Shape xs = x.shape();
    require(start >= 0 && count > 0 && start + count <= xs.c, ErrorCode::invalid_input, "slice_channels range");
    Tensor out(Shape{xs.n, count, xs.h, xs.w});
    for (int n = 0; n < xs.n; ++n) std::copy_n(x.value().plane(n, start), count * xs.plane(), out.plane(n, 0));
    return make_op(std::move(out), {x}, [xs, start, count](Node& self) {
        Tensor& g = parent(self, 0).grad_buffer();
        for (int n = 0; n < xs.n; ++n) {
            double* d = g.plane(n, start);
            const double* go = self.grad.plane(n, 0);
            for (std::size_t j = 0; j < count * xs.plane(); ++j) d[j] += go[j];
        }
    });
}

Var resize_bilinear(const Var& x, int height, int width) {
    const Shape xs = x.shape();
    require(height >= 1 && width >= 1, ErrorCode::invalid_input, "resize_bilinear: target must be >= 1x1");
    if (height == xs.h && width == xs.w) return x;
    const auto ty = bilinear_taps(xs.h, height);
    const auto tx = bilinear_taps(xs.w, width);
    Tensor out(Shape{xs.n, xs.c, height, width});
    for (int n = 0; n < xs.n; ++n) {
        for (int c = 0; c < xs.c; ++c) {
            const double* src = x.value().plane(n, c);
            double* dst = out.plane(n, c);
            for (int y = 0; y < height; ++y) {
                const double* r0 = src + static_cast<std::size_t>(ty[y].i0) * xs.w;
                const double* r1 = src + static_cast<std::size_t>(ty[y].i1) * xs.w;
                const double wy = ty[y].w1;
                for (int xo = 0; xo < width; ++xo) {
                    const auto& t = tx[xo];
                    const double top = (1 - t.w1) * r0[t.i0] + t.w1 * r0[t.i1];
                    const double bot = (1 - t.w1) * r1[t.i0] + t.w1 * r1[t.i1];
                    dst[static_cast<std::size_t>(y) * width + xo] = (1 - wy) * top + wy * bot;
                }
            }
        }
    }
    return make_op(std::move(out), {x}, [xs, ty, tx, height, width](Node& self) {
        Tensor& g = parent(self, 0).grad_buffer();
        for (int n = 0; n < xs.n; ++n) {
            for (int c = 0; c < xs.c; ++c) {
                double* d = g.plane(n, c);
                const double* go = self.grad.plane(n, c);
                for (int y = 0; y < height; ++y) {
                    double* r0 = d + static_cast<std::size_t>(ty[y].i0) * xs.w;
                    double* r1 = d + static_cast<std::size_t>(ty[y].i1) * xs.w;
                    const double wy = ty[y].w1;
                    for (int xo = 0; xo < width; ++xo) {
                        const auto& t = tx[xo];
                        const double v = go[static_cast<std::size_t>(y) * width + xo];
                        r0[t.i0] += (1 - wy) * (1 - t.w1) * v;
                        r0[t.i1] += (1 - wy) * t.w1 * v;
                        r1[t.i0] += wy * (1 - t.w1) * v;
                        r1[t.i1] += wy * t.w1 * v;
                    }
                }
            }
        }
    });
}

Var avg_pool2(const Var& x) {
    const Shape xs = x.shape();
    const int fy = xs.h > 1 ? 2 : 1;
    const int fx = xs.w > 1 ? 2 : 1;
    const int ho = xs.h / fy;
    const int wo = xs.w / fx;
    const double inv = 1.0 / (fy * fx);
    Tensor out(Shape{xs.n, xs.c, ho, wo});
    for (int n = 0; n < xs.n; ++n) {
        for (int c = 0; c < xs.c; ++c) {
            for (int y = 0; y < ho; ++y) {
                for (int xo = 0; xo < wo; ++xo) {
                    double s = 0.0;
                    for (int dy = 0; dy < fy; ++dy) {
                        for (int dx = 0; dx < fx; ++dx) s += x.value()(n, c, y * fy + dy, xo * fx + dx);
                    }
                    out(n, c, y, xo) = s * inv;
                }
            }
        }
    }
    return make_op(std::move(out), {x}, [xs, fy, fx, ho, wo, inv](Node& self) {
        Tensor& g = parent(self, 0).grad_buffer();
        for (int n = 0; n < xs.n; ++n) {
            for (int c = 0; c < xs.c; ++c) {
                for (int y = 0; y < ho; ++y) {
                    for (int xo = 0; xo < wo; ++xo) {
                        const double v = self.grad(n, c, y, xo) * inv;
                        for (int dy = 0; dy < fy; ++dy) {
                            for (int dx = 0; dx < fx; ++dx) g(n, c, y * fy + dy, xo * fx + dx) += v;
                        }
                    }
                }
            }
        }
    });
}

Var warp(const Var& x, const Var& flow) {
    const Shape xs = x.shape();
    const Shape fs = flow.shape();
    require(fs.n == xs.n && fs.c == 2 && fs.h == xs.h && fs.w == xs.w, ErrorCode::invalid_input,
            "warp: flow " + fs.str() + " incompatible with input " + xs.str());
    const int H = xs.h;
    const int W = xs.w;
    Tensor out(xs);
    for (int n = 0; n < xs.n; ++n) {
        const double* fdx = flow.value().plane(n, 0);
        const double* fdy = flow.value().plane(n, 1);
        for (int y = 0; y < H; ++y) {
            for (int xo = 0; xo < W; ++xo) {
                const std::size_t i = static_cast<std::size_t>(y) * W + xo;
                const double px = xo + fdx[i];
                const double py = y + fdy[i];
                const double fx0 = std::floor(px);
                const double fy0 = std::floor(py);
                if (fx0 < -2.0 || fy0 < -2.0 || fx0 > W + 1.0 || fy0 > H + 1.0) continue;
                const int x0 = static_cast<int>(fx0);
                const int y0 = static_cast<int>(fy0);
                const double ax = px - fx0;
                const double ay = py - fy0;
                const bool in00 = x0 >= 0 && x0 < W && y0 >= 0 && y0 < H;
                const bool in10 = x0 + 1 >= 0 && x0 + 1 < W && y0 >= 0 && y0 < H;
                const bool in01 = x0 >= 0 && x0 < W && y0 + 1 >= 0 && y0 + 1 < H;
                const bool in11 = x0 + 1 >= 0 && x0 + 1 < W && y0 + 1 >= 0 && y0 + 1 < H;
                for (int c = 0; c < xs.c; ++c) {
                    const double* src = x.value().plane(n, c);
                    const double v00 = in00 ? src[y0 * W + x0] : 0.0;
                    const double v10 = in10 ? src[y0 * W + x0 + 1] : 0.0;
                    const double v01 = in01 ? src[(y0 + 1) * W + x0] : 0.0;
                    const double v11 = in11 ? src[(y0 + 1) * W + x0 + 1] : 0.0;
                    out.plane(n, c)[i] =
                        (1 - ax) * (1 - ay) * v00 + ax * (1 - ay) * v10 + (1 - ax) * ay * v01 + ax * ay * v11;
                }
            }
        }
    }
    return make_op(std::move(out), {x, flow}, [xs, H, W](Node& self) {
        Node& nx = parent(self, 0);
        Node& nf = parent(self, 1);
        for (int n = 0; n < xs.n; ++n) {
            const double* fdx = nf.value.plane(n, 0);
            const double* fdy = nf.value.plane(n, 1);
            for (int y = 0; y < H; ++y) {
                for (int xo = 0; xo < W; ++xo) {
                    const std::size_t i = static_cast<std::size_t>(y) * W + xo;
                    const double px = xo + fdx[i];
                    const double py = y + fdy[i];
                    const double fx0 = std::floor(px);
                    const double fy0 = std::floor(py);
                    if (fx0 < -2.0 || fy0 < -2.0 || fx0 > W + 1.0 || fy0 > H + 1.0) continue;
                    const int x0 = static_cast<int>(fx0);
                    const int y0 = static_cast<int>(fy0);
                    const double ax = px - fx0;
                    const double ay = py - fy0;
                    const bool in00 = x0 >= 0 && x0 < W && y0 >= 0 && y0 < H;
                    const bool in10 = x0 + 1 >= 0 && x0 + 1 < W && y0 >= 0 && y0 < H;
                    const bool in01 = x0 >= 0 && x0 < W && y0 + 1 >= 0 && y0 + 1 < H;
                    const bool in11 = x0 + 1 >= 0 && x0 + 1 < W && y0 + 1 >= 0 && y0 + 1 < H;
                    double gdx = 0.0;
                    double gdy = 0.0;
                    for (int c = 0; c < xs.c; ++c) {
                        const double go = self.grad.plane(n, c)[i];
                        if (go == 0.0) continue;
                        if (nx.requires_grad) {
                            double* g = nx.grad_buffer().plane(n, c);
                            if (in00) g[y0 * W + x0] += (1 - ax) * (1 - ay) * go;
                            if (in10) g[y0 * W + x0 + 1] += ax * (1 - ay) * go;
                            if (in01) g[(y0 + 1) * W + x0] += (1 - ax) * ay * go;
                            if (in11) g[(y0 + 1) * W + x0 + 1] += ax * ay * go;
                        }
                        if (nf.requires_grad) {
                            const double* src = nx.value.plane(n, c);
                            const double v00 = in00 ? src[y0 * W + x0] : 0.0;
                            const double v10 = in10 ? src[y0 * W + x0 + 1] : 0.0;
                            const double v01 = in01 ? src[(y0 + 1) * W + x0] : 0.0;
                            const double v11 = in11 ? src[(y0 + 1) * W + x0 + 1] : 0.0;
                            gdx += go * ((1 - ay) * (v10 - v00) + ay * (v11 - v01));
                            gdy += go * ((1 - ax) * (v01 - v00) + ax * (v11 - v10));
                        }
                    }
                    if (nf.requires_grad) {
                        nf.grad_buffer().plane(n, 0)[i] += gdx;
                        nf.grad_buffer().plane(n, 1)[i] += gdy;
                    }
                }
            }
        }
    });
}

Var instance_norm(const Var& x, double eps) {
    const Shape xs = x.shape();
    const std::size_t P = xs.plane();
    Tensor out(xs);
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(xs.n) * xs.c);
    for (int n = 0; n < xs.n; ++n) {
        for (int c = 0; c < xs.c; ++c) {
            const double* src = x.value().plane(n, c);
            double m = 0.0;
            for (std::size_t i = 0; i < P; ++i) m += src[i];
            m /= static_cast<double>(P);
            double var = 0.0;
            for (std::size_t i = 0; i < P; ++i) var += (src[i] - m) * (src[i] - m);
            var /= static_cast<double>(P);
            const double is = 1.0 / std::sqrt(var + eps);
            (*inv_std)[static_cast<std::size_t>(n) * xs.c + c] = is;
            double* dst = out.plane(n, c);
            for (std::size_t i = 0; i < P; ++i) dst[i] = (src[i] - m) * is;
        }
    }
    return make_op(std::move(out), {x}, [xs, P, inv_std](Node& self) {
        Tensor& g = parent(self, 0).grad_buffer();
        for (int n = 0; n < xs.n; ++n) {
            for (int c = 0; c < xs.c; ++c) {
                const double* go = self.grad.plane(n, c);
                const double* xh = self.value.plane(n, c);
                double mg = 0.0;
                double mgx = 0.0;
                for (std::size_t i = 0; i < P; ++i) {
                    mg += go[i];
                    mgx += go[i] * xh[i];
                }
                mg /= static_cast<double>(P);
                mgx /= static_cast<double>(P);
                const double is = (*inv_std)[static_cast<std::size_t>(n) * xs.c + c];
                double* d = g.plane(n, c);
                for (std::size_t i = 0; i < P; ++i) d[i] += is * (go[i] - mg - xh[i] * mgx);
            }
        }
    });
}

Var softmax_channels(const Var& x) {
    const Shape xs = x.shape();
    const std::size_t P = xs.plane();
    Tensor out(xs);
    for (int n = 0; n < xs.n; ++n) {
        for (std::size_t i = 0; i < P; ++i) {
            double mx = -INFINITY;
            for (int c = 0; c < xs.c; ++c) mx = std::max(mx, x.value().plane(n, c)[i]);
            double s = 0.0;
            for (int c = 0; c < xs.c; ++c) {
                const double e = std::exp(x.value().plane(n, c)[i] - mx);
                out.plane(n, c)[i] = e;
                s += e;
            }
            for (int c = 0; c < xs.c; ++c) out.plane(n, c)[i] /= s;
        }
    }
    return make_op(std::move(out), {x}, [xs, P](Node& self) {
        Tensor& g = parent(self, 0).grad_buffer();
        for (int n = 0; n < xs.n; ++n) {
            for (std::size_t i = 0; i < P; ++i) {
                double dot = 0.0;
                for (int c = 0; c < xs.c; ++c) dot += self.grad.plane(n, c)[i] * self.value.plane(n, c)[i];
                for (int c = 0; c < xs.c; ++c) {
                    g.plane(n, c)[i] += self.value.plane(n, c)[i] * (self.grad.plane(n, c)[i] - dot);
                }
            }
        }
    });
}

Var sum(const Var& x) {
    double s = 0.0;
    for (double v : x.value().data()) s += v;
    return make_op(Tensor::scalar(s), {x}, [](Node& self) {
        const double go = self.grad[0];
        for (double& g : parent(self, 0).grad_buffer().data()) g += go;
    });
}

Var mean(const Var& x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().numel())); }

Var cross_entropy(const Var& logits, std::span<const std::uint8_t> labels) {
    const Shape s = logits.shape();
    const std::size_t P = s.plane();
    require(labels.size() == s.n * P, ErrorCode::invalid_input, "cross_entropy: label count does not match logits");
    auto probs = std::make_shared<Tensor>(s);
    auto lab = std::make_shared<std::vector<std::uint8_t>>(labels.begin(), labels.end());
    double total = 0.0;
    for (int n = 0; n < s.n; ++n) {
        for (std::size_t i = 0; i < P; ++i) {
            const int target = (*lab)[n * P + i];
            require(target < s.c, ErrorCode::invalid_input, "cross_entropy: label exceeds class count");
            double mx = -INFINITY;
            for (int c = 0; c < s.c; ++c) mx = std::max(mx, logits.value().plane(n, c)[i]);
            double z = 0.0;
            for (int c = 0; c < s.c; ++c) {
                const double e = std::exp(logits.value().plane(n, c)[i] - mx);
                probs->plane(n, c)[i] = e;
                z += e;
            }
            for (int c = 0; c < s.c; ++c) probs->plane(n, c)[i] /= z;
            total += -(logits.value().plane(n, target)[i] - mx - std::log(z));
        }
    }
    const double count = static_cast<double>(s.n * P);
    return make_op(Tensor::scalar(total / count), {logits}, [s, P, probs, lab, count](Node& self) {
        Tensor& g = parent(self, 0).grad_buffer();
        const double go = self.grad[0] / count;
        for (int n = 0; n < s.n; ++n) {
            for (int c = 0; c < s.c; ++c) {
                const double* p = probs->plane(n, c);
                double* d = g.plane(n, c);
                for (std::size_t i = 0; i < P; ++i) {
                    const double onehot = (*lab)[n * P + i] == c ? 1.0 : 0.0;
                    d[i] += go * (p[i] - onehot);
                }
            }
        }
    });
}

Var l1(const Var& a, const Var& b) {
    require_same(a, b, "l1");
    const auto av = a.value().data();
    const auto bv = b.value().data();
    double s = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) s += std::abs(av[i] - bv[i]);
    const double count = static_cast<double>(av.size());
    return make_op(Tensor::scalar(s / count), {a, b}, [count](Node& self) {
        Node& na = parent(self, 0);
        Node& nb = parent(self, 1);
        const auto av = na.value.data();
        const auto bv = nb.value.data();
        const double go = self.grad[0] / count;
        for (std::size_t i = 0; i < av.size(); ++i) {
            const double d = av[i] - bv[i];
            const double sg = d > 0 ? go : (d < 0 ? -go : 0.0);
            if (na.requires_grad) na.grad_buffer()[i] += sg;
            if (nb.requires_grad) nb.grad_buffer()[i] -= sg;
        }
    });
}

Var masked_l1(const Var& a, const Var& b, const Var& mask) {
    require_same(a, b, "masked_l1");
    const Shape s = a.shape();
    const Shape ms = mask.shape();
    require(ms.c == 1 && ms.n == s.n && ms.h == s.h && ms.w == s.w, ErrorCode::invalid_input,
            "masked_l1: mask shape " + ms.str());
    double msum = 0.0;
    for (double v : mask.value().data()) msum += v;
    const double denom = std::max(1.0, msum * s.c);
    double total = 0.0;
    for (int n = 0; n < s.n; ++n) {
        const double* m = mask.value().plane(n, 0);
        for (int c = 0; c < s.c; ++c) {
            const double* pa = a.value().plane(n, c);
            const double* pb = b.value().plane(n, c);
            for (std::size_t i = 0; i < s.plane(); ++i) total += m[i] * std::abs(pa[i] - pb[i]);
        }
    }
    return make_op(Tensor::scalar(total / denom), {a, b}, [s, denom, mask](Node& self) {
        Node& na = parent(self, 0);
        Node& nb = parent(self, 1);
        const double go = self.grad[0] / denom;
        for (int n = 0; n < s.n; ++n) {
            const double* m = mask.value().plane(n, 0);
            for (int c = 0; c < s.c; ++c) {
                const double* pa = na.value.plane(n, c);
                const double* pb = nb.value.plane(n, c);
                for (std::size_t i = 0; i < s.plane(); ++i) {
                    const double d = pa[i] - pb[i];
                    const double sg = m[i] * (d > 0 ? go : (d < 0 ? -go : 0.0));
                    if (na.requires_grad) na.grad_buffer().plane(n, c)[i] += sg;
                    if (nb.requires_grad) nb.grad_buffer().plane(n, c)[i] -= sg;
                }
            }
        }
    });
}

Var mean_squared_to(const Var& x, double target) {
    const auto v = x.value().data();
    double s = 0.0;
    for (double e : v) s += (e - target) * (e - target);
    const double count = static_cast<double>(v.size());
    return make_op(Tensor::scalar(s / count), {x}, [target, count](Node& self) {
        Node& nx = parent(self, 0);
        auto g = nx.grad_buffer().data();
        const auto xv = nx.value.data();
        const double go = self.grad[0];
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += go * 2.0 * (xv[i] - target) / count;
    });
}

}  // namespace vfr::nn
