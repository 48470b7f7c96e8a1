#pragma once

#include <Eigen/Dense>

#include "scgan/autodiff.hpp"

namespace scgan {

namespace detail {

template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MapM = Eigen::Map<MatX<S>>;
template <typename S>
using CMapM = Eigen::Map<const MatX<S>>;

// im2col for one NHWC sample, zero padding, stride 1.
// col is [Ho*Wo, Kh*Kw*C], matching the row-major weight layout [Kh,Kw,Cin,Cout].
template <typename S>
void im2col(const Tensor<S>& x, int n, int kh, int kw, int pad, Tensor<S>& col) {
  const int H = x.dim(1), W = x.dim(2), C = x.dim(3);
  const int Ho = H + 2 * pad - kh + 1, Wo = W + 2 * pad - kw + 1;
  const S* xp = x.data() + static_cast<std::int64_t>(n) * H * W * C;
  S* cp = col.data();
  for (int ho = 0; ho < Ho; ++ho) {
    for (int wo = 0; wo < Wo; ++wo) {
      for (int dy = 0; dy < kh; ++dy) {
        const int hy = ho + dy - pad;
        if (hy < 0 || hy >= H) {
          for (int dx = 0; dx < kw; ++dx)
            for (int c = 0; c < C; ++c) *cp++ = S(0);
          continue;
        }
        for (int dx = 0; dx < kw; ++dx) {
          const int wx = wo + dx - pad;
          if (wx < 0 || wx >= W) {
            for (int c = 0; c < C; ++c) *cp++ = S(0);
          } else {
            const S* src = xp + (static_cast<std::int64_t>(hy) * W + wx) * C;
            for (int c = 0; c < C; ++c) *cp++ = src[c];
          }
        }
      }
    }
  }
}

template <typename S>
void col2im_accum(const Tensor<S>& col, int n, int kh, int kw, int pad, Tensor<S>& dx) {
  const int H = dx.dim(1), W = dx.dim(2), C = dx.dim(3);
  const int Ho = H + 2 * pad - kh + 1, Wo = W + 2 * pad - kw + 1;
  S* xp = dx.data() + static_cast<std::int64_t>(n) * H * W * C;
  const S* cp = col.data();
  for (int ho = 0; ho < Ho; ++ho) {
    for (int wo = 0; wo < Wo; ++wo) {
      for (int dy = 0; dy < kh; ++dy) {
        const int hy = ho + dy - pad;
        if (hy < 0 || hy >= H) {
          cp += kw * C;
          continue;
        }
        for (int dx_ = 0; dx_ < kw; ++dx_) {
          const int wx = wo + dx_ - pad;
          if (wx < 0 || wx >= W) {
            cp += C;
          } else {
            S* dst = xp + (static_cast<std::int64_t>(hy) * W + wx) * C;
            for (int c = 0; c < C; ++c) dst[c] += *cp++;
          }
        }
      }
    }
  }
}

}  // namespace detail

// 2-D convolution, stride 1, zero padding. x: [N,H,W,Cin], w: [Kh,Kw,Cin,Cout],
// b: [Cout] (may be undefined Var for bias-free convs).
template <typename S>
Var<S> conv2d(const Var<S>& x, const Var<S>& w, const Var<S>& b, int pad) {
  SCGAN_CHECK(x.shape().size() == 4, "conv2d: input must be NHWC, got ", shape_str(x.shape()));
  SCGAN_CHECK(w.shape().size() == 4, "conv2d: weight must be [Kh,Kw,Cin,Cout]");
  const int N = x.shape()[0], H = x.shape()[1], W = x.shape()[2], C = x.shape()[3];
  const int Kh = w.shape()[0], Kw = w.shape()[1], Ci = w.shape()[2], Co = w.shape()[3];
  SCGAN_CHECK(Ci == C, "conv2d: channel mismatch, input ", C, " vs weight ", Ci);
  const int Ho = H + 2 * pad - Kh + 1, Wo = W + 2 * pad - Kw + 1;
  SCGAN_CHECK(Ho >= 1 && Wo >= 1, "conv2d: kernel ", Kh, "x", Kw, " too large for input ", shape_str(x.shape()));
  const bool has_bias = b.defined();
  if (has_bias) SCGAN_CHECK(b.shape() == Shape{Co}, "conv2d: bias shape mismatch");

  Tensor<S> out(Shape{N, Ho, Wo, Co});
  Tensor<S> col(Shape{Ho * Wo, Kh * Kw * C});
  detail::CMapM<S> wm(w.value().data(), Kh * Kw * C, Co);
  for (int n = 0; n < N; ++n) {
    detail::im2col(x.value(), n, Kh, Kw, pad, col);
    detail::CMapM<S> cm(col.data(), Ho * Wo, Kh * Kw * C);
    detail::MapM<S> om(out.data() + static_cast<std::int64_t>(n) * Ho * Wo * Co, Ho * Wo, Co);
    om.noalias() = cm * wm;
  }
  if (has_bias) {
    for (std::int64_t r = 0; r < static_cast<std::int64_t>(N) * Ho * Wo; ++r)
      for (int c = 0; c < Co; ++c) out[r * Co + c] += b.value()[c];
  }

  auto px = x.node(), pw = w.node();
  auto pb = has_bias ? b.node() : nullptr;
  std::vector<std::shared_ptr<Node<S>>> parents{px, pw};
  if (pb) parents.push_back(pb);
  return Var<S>(detail::make_op<S>(std::move(out), std::move(parents),
                                   [px, pw, pb, N, Kh, Kw, pad, Ho, Wo, C, Co](Node<S>& self) {
    Tensor<S> col(Shape{Ho * Wo, Kh * Kw * C});
    detail::CMapM<S> wm(pw->value.data(), Kh * Kw * C, Co);
    const bool need_dw = pw->requires_grad;
    const bool need_dx = px->requires_grad;
    if (need_dw) pw->ensure_grad();
    if (need_dx) px->ensure_grad();
    Tensor<S> dcol(Shape{Ho * Wo, Kh * Kw * C});
    for (int n = 0; n < N; ++n) {
      detail::CMapM<S> gm(self.grad.data() + static_cast<std::int64_t>(n) * Ho * Wo * Co, Ho * Wo, Co);
      if (need_dw) {
        detail::im2col(px->value, n, Kh, Kw, pad, col);
        detail::CMapM<S> cm(col.data(), Ho * Wo, Kh * Kw * C);
        detail::MapM<S> dwm(pw->grad.data(), Kh * Kw * C, Co);
        dwm.noalias() += cm.transpose() * gm;
      }
      if (need_dx) {
        detail::MapM<S> dcm(dcol.data(), Ho * Wo, Kh * Kw * C);
        dcm.noalias() = gm * wm.transpose();
        detail::col2im_accum(dcol, n, Kh, Kw, pad, px->grad);
      }
    }
    if (pb && pb->requires_grad) {
      auto& db = pb->ensure_grad();
      for (std::int64_t r = 0; r < static_cast<std::int64_t>(N) * Ho * Wo; ++r)
        for (int c = 0; c < Co; ++c) db[c] += self.grad[r * Co + c];
    }
  }));
}

// x: [N,D] (or flattened), w: [D,O], b: [O] optional
template <typename S>
Var<S> linear(const Var<S>& x, const Var<S>& w, const Var<S>& b) {
  SCGAN_CHECK(x.shape().size() == 2 && w.shape().size() == 2, "linear: expects [N,D] x [D,O]");
  const int N = x.shape()[0], D = x.shape()[1], O = w.shape()[1];
  SCGAN_CHECK(w.shape()[0] == D, "linear: dim mismatch D=", D, " vs weight rows ", w.shape()[0]);
  const bool has_bias = b.defined();
  Tensor<S> out(Shape{N, O});
  detail::CMapM<S> xm(x.value().data(), N, D), wm(w.value().data(), D, O);
  detail::MapM<S> om(out.data(), N, O);
  om.noalias() = xm * wm;
  if (has_bias)
    for (int n = 0; n < N; ++n)
      for (int o = 0; o < O; ++o) out[static_cast<std::int64_t>(n) * O + o] += b.value()[o];

  auto px = x.node(), pw = w.node();
  auto pb = has_bias ? b.node() : nullptr;
  std::vector<std::shared_ptr<Node<S>>> parents{px, pw};
  if (pb) parents.push_back(pb);
  return Var<S>(detail::make_op<S>(std::move(out), std::move(parents), [px, pw, pb, N, D, O](Node<S>& self) {
    detail::CMapM<S> gm(self.grad.data(), N, O);
    if (pw->requires_grad) {
      detail::CMapM<S> xm(px->value.data(), N, D);
      detail::MapM<S> dwm(pw->ensure_grad().data(), D, O);
      dwm.noalias() += xm.transpose() * gm;
    }
    if (px->requires_grad) {
      detail::CMapM<S> wm(pw->value.data(), D, O);
      detail::MapM<S> dxm(px->ensure_grad().data(), N, D);
      dxm.noalias() += gm * wm.transpose();
    }
    if (pb && pb->requires_grad) {
      auto& db = pb->ensure_grad();
      for (int n = 0; n < N; ++n)
        for (int o = 0; o < O; ++o) db[o] += self.grad[static_cast<std::int64_t>(n) * O + o];
    }
  }));
}

// 2x2 stride-2 average pooling, NHWC
template <typename S>
Var<S> avg_pool2(const Var<S>& x) {
  SCGAN_CHECK(x.shape().size() == 4, "avg_pool2: expects NHWC");
  const int N = x.shape()[0], H = x.shape()[1], W = x.shape()[2], C = x.shape()[3];
  SCGAN_CHECK(H % 2 == 0 && W % 2 == 0, "avg_pool2: H,W must be even, got ", H, "x", W);
  const int Ho = H / 2, Wo = W / 2;
  Tensor<S> out(Shape{N, Ho, Wo, C});
  for (int n = 0; n < N; ++n)
    for (int ho = 0; ho < Ho; ++ho)
      for (int wo = 0; wo < Wo; ++wo)
        for (int c = 0; c < C; ++c)
          out.at(n, ho, wo, c) = (x.value().at(n, 2 * ho, 2 * wo, c) + x.value().at(n, 2 * ho, 2 * wo + 1, c) +
                                  x.value().at(n, 2 * ho + 1, 2 * wo, c) + x.value().at(n, 2 * ho + 1, 2 * wo + 1, c)) /
                                 S(4);
  auto px = x.node();
  return Var<S>(detail::make_op<S>(std::move(out), {px}, [px, N, Ho, Wo, C](Node<S>& self) {
    auto& g = px->ensure_grad();
    for (int n = 0; n < N; ++n)
      for (int ho = 0; ho < Ho; ++ho)
        for (int wo = 0; wo < Wo; ++wo)
          for (int c = 0; c < C; ++c) {
            const S q = self.grad.at(n, ho, wo, c) / S(4);
            g.at(n, 2 * ho, 2 * wo, c) += q;
            g.at(n, 2 * ho, 2 * wo + 1, c) += q;
            g.at(n, 2 * ho + 1, 2 * wo, c) += q;
            g.at(n, 2 * ho + 1, 2 * wo + 1, c) += q;
          }
  }));
}

// 2x2 stride-2 max pooling, NHWC; first maximum wins on ties
template <typename S>
Var<S> max_pool2(const Var<S>& x) {
  SCGAN_CHECK(x.shape().size() == 4, "max_pool2: expects NHWC");
  const int N = x.shape()[0], H = x.shape()[1], W = x.shape()[2], C = x.shape()[3];
  SCGAN_CHECK(H % 2 == 0 && W % 2 == 0, "max_pool2: H,W must be even, got ", H, "x", W);
  const int Ho = H / 2, Wo = W / 2;
  Tensor<S> out(Shape{N, Ho, Wo, C});
  auto argmax = std::make_shared<std::vector<std::int64_t>>(static_cast<std::size_t>(out.size()));
  std::int64_t oi = 0;
  for (int n = 0; n < N; ++n)
    for (int ho = 0; ho < Ho; ++ho)
      for (int wo = 0; wo < Wo; ++wo)
        for (int c = 0; c < C; ++c, ++oi) {
          S best = x.value().at(n, 2 * ho, 2 * wo, c);
          std::int64_t bidx = ((static_cast<std::int64_t>(n) * H + 2 * ho) * W + 2 * wo) * C + c;
          const int dys[3][2] = {{0, 1}, {1, 0}, {1, 1}};
          for (const auto& d : dys) {
            const int hy = 2 * ho + d[0], wx = 2 * wo + d[1];
            const S v = x.value().at(n, hy, wx, c);
            if (v > best) {
              best = v;
              bidx = ((static_cast<std::int64_t>(n) * H + hy) * W + wx) * C + c;
            }
          }
          out[oi] = best;
          (*argmax)[static_cast<std::size_t>(oi)] = bidx;
        }
  auto px = x.node();
  return Var<S>(detail::make_op<S>(std::move(out), {px}, [px, argmax](Node<S>& self) {
    auto& g = px->ensure_grad();
    for (std::int64_t i = 0; i < self.grad.size(); ++i) g[(*argmax)[static_cast<std::size_t>(i)]] += self.grad[i];
  }));
}

// x2 bilinear upsampling, half-pixel centers, edges clamped. NHWC.
template <typename S>
Var<S> upsample_bilinear2x(const Var<S>& x) {
  SCGAN_CHECK(x.shape().size() == 4, "upsample_bilinear2x: expects NHWC");
  const int N = x.shape()[0], H = x.shape()[1], W = x.shape()[2], C = x.shape()[3];
  const int Ho = 2 * H, Wo = 2 * W;
  // per-axis taps: source index pair + weight of the lower tap
  auto taps = [](int out_i, int in_n, int& i0, int& i1, S& w0) {
    const double src = (out_i + 0.5) / 2.0 - 0.5;
    double f = std::floor(src);
    i0 = static_cast<int>(f);
    i1 = i0 + 1;
    S t = static_cast<S>(src - f);
    w0 = S(1) - t;
    if (i0 < 0) i0 = 0;
    if (i1 > in_n - 1) i1 = in_n - 1;
  };
  Tensor<S> out(Shape{N, Ho, Wo, C});
  for (int n = 0; n < N; ++n)
    for (int ho = 0; ho < Ho; ++ho) {
      int y0, y1;
      S wy;
      taps(ho, H, y0, y1, wy);
      for (int wo = 0; wo < Wo; ++wo) {
        int x0, x1;
        S wx;
        taps(wo, W, x0, x1, wx);
        for (int c = 0; c < C; ++c)
          out.at(n, ho, wo, c) = wy * (wx * x.value().at(n, y0, x0, c) + (S(1) - wx) * x.value().at(n, y0, x1, c)) +
                                 (S(1) - wy) * (wx * x.value().at(n, y1, x0, c) + (S(1) - wx) * x.value().at(n, y1, x1, c));
      }
    }
  auto px = x.node();
  return Var<S>(detail::make_op<S>(std::move(out), {px}, [px, taps, N, H, W, C, Ho, Wo](Node<S>& self) {
    auto& g = px->ensure_grad();
    for (int n = 0; n < N; ++n)
      for (int ho = 0; ho < Ho; ++ho) {
        int y0, y1;
        S wy;
        taps(ho, H, y0, y1, wy);
        for (int wo = 0; wo < Wo; ++wo) {
          int x0, x1;
          S wx;
          taps(wo, W, x0, x1, wx);
          for (int c = 0; c < C; ++c) {
            const S up = self.grad.at(n, ho, wo, c);
            g.at(n, y0, x0, c) += up * wy * wx;
            g.at(n, y0, x1, c) += up * wy * (S(1) - wx);
            g.at(n, y1, x0, c) += up * (S(1) - wy) * wx;
            g.at(n, y1, x1, c) += up * (S(1) - wy) * (S(1) - wx);
          }
        }
      }
  }));
}

// Depth-to-space: [N,H,W,C*r^2] -> [N,H*r,W*r,C] with
// out[n, h*r+dy, w*r+dx, c] = in[n, h, w, (dy*r+dx)*C + c].
template <typename S>
Var<S> pixel_shuffle(const Var<S>& x, int r) {
  SCGAN_CHECK(x.shape().size() == 4, "pixel_shuffle: expects NHWC");
  const int N = x.shape()[0], H = x.shape()[1], W = x.shape()[2], Cin = x.shape()[3];
  SCGAN_CHECK(r >= 1 && Cin % (r * r) == 0, "pixel_shuffle: channels ", Cin, " not divisible by r^2=", r * r);
  const int C = Cin / (r * r);
  Tensor<S> out(Shape{N, H * r, W * r, C});
  for (int n = 0; n < N; ++n)
    for (int h = 0; h < H; ++h)
      for (int w = 0; w < W; ++w)
        for (int dy = 0; dy < r; ++dy)
          for (int dx = 0; dx < r; ++dx)
            for (int c = 0; c < C; ++c)
              out.at(n, h * r + dy, w * r + dx, c) = x.value().at(n, h, w, (dy * r + dx) * C + c);
  auto px = x.node();
  return Var<S>(detail::make_op<S>(std::move(out), {px}, [px, N, H, W, C, r](Node<S>& self) {
    auto& g = px->ensure_grad();
    for (int n = 0; n < N; ++n)
      for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w)
          for (int dy = 0; dy < r; ++dy)
            for (int dx = 0; dx < r; ++dx)
              for (int c = 0; c < C; ++c)
                g.at(n, h, w, (dy * r + dx) * C + c) += self.grad.at(n, h * r + dy, w * r + dx, c);
  }));
}

// Inverse of pixel_shuffle (space-to-depth); plain tensor helper for tests.
template <typename S>
Tensor<S> pixel_unshuffle(const Tensor<S>& x, int r) {
  SCGAN_CHECK(x.rank() == 4, "pixel_unshuffle: expects NHWC");
  const int N = x.dim(0), Ho = x.dim(1), Wo = x.dim(2), C = x.dim(3);
  SCGAN_CHECK(Ho % r == 0 && Wo % r == 0, "pixel_unshuffle: dims not divisible by r");
  const int H = Ho / r, W = Wo / r;
  Tensor<S> out(Shape{N, H, W, C * r * r});
  for (int n = 0; n < N; ++n)
    for (int h = 0; h < H; ++h)
      for (int w = 0; w < W; ++w)
        for (int dy = 0; dy < r; ++dy)
          for (int dx = 0; dx < r; ++dx)
            for (int c = 0; c < C; ++c)
              out.at(n, h, w, (dy * r + dx) * C + c) = x.at(n, h * r + dy, w * r + dx, c);
  return out;
}

}  // namespace scgan
