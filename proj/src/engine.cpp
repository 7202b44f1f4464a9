#include "engine.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <utility>

#include "ltnas/kernels.hpp"

namespace ltnas::engine {

namespace k = ltnas::kernels;

void f32_round(std::vector<double>& v) {
  for (double& x : v) x = f32(x);
}

void check_input(const SearchSpace& s, const Batch& x) {
  if (x.n < 1) throw std::invalid_argument("forward: empty batch");
  if (x.c != s.input_channels || x.h != s.input_height ||
      x.w != s.input_width)
    throw std::invalid_argument(
        "forward: batch geometry [" + std::to_string(x.c) + "x" +
        std::to_string(x.h) + "x" + std::to_string(x.w) +
        "] does not match space input [" + std::to_string(s.input_channels) +
        "x" + std::to_string(s.input_height) + "x" +
        std::to_string(s.input_width) + "]");
}

void check_genotype(const SearchSpace& s, const Genotype& g) {
  if (g.size() != s.num_edges())
    throw std::invalid_argument("genotype has " + std::to_string(g.size()) +
                                " entries, space has " +
                                std::to_string(s.num_edges()) + " edges");
  for (int e = 0; e < g.size(); ++e)
    if (g.ops[e] < 0 || g.ops[e] >= s.num_ops())
      throw std::out_of_range("genotype op index " +
                              std::to_string(g.ops[e]) + " at edge " +
                              std::to_string(e) + " outside [0, " +
                              std::to_string(s.num_ops()) + ")");
}

int edge_offset(int nodes_per_cell, int source, int target) {
  const int m = nodes_per_cell;
  return source * (2 * m - source - 1) / 2 + (target - source - 1);
}

ModelView view_of(SuperNetwork& net, const Genotype& g) {
  check_genotype(net.space, g);
  ModelView v;
  v.space = &net.space;
  v.stem_w = &net.stem_w;
  v.stem_b = &net.stem_b;
  v.cls_w = &net.cls_w;
  v.cls_b = &net.cls_b;
  v.edge_op.resize(net.space.num_edges());
  v.edge_slot.resize(net.space.num_edges());
  for (int e = 0; e < net.space.num_edges(); ++e) {
    v.edge_op[e] = &net.edge_ops[e][g.ops[e]];
    v.edge_slot[e] = g.ops[e];
  }
  return v;
}

ModelView view_of(Subnet& sub) {
  ModelView v;
  v.space = &sub.space;
  v.stem_w = &sub.stem_w;
  v.stem_b = &sub.stem_b;
  v.cls_w = &sub.cls_w;
  v.cls_b = &sub.cls_b;
  v.edge_op.resize(sub.space.num_edges());
  v.edge_slot.assign(sub.space.num_edges(), 0);
  for (int e = 0; e < sub.space.num_edges(); ++e) v.edge_op[e] = &sub.ops[e];
  return v;
}

// ============================ op primitives ============================

namespace {

void depthwise_conv(const Batch& in, const std::vector<double>& w, int ksz,
                    Batch& out) {
  out = Batch(in.n, in.c, in.h, in.w);
  const int pad = ksz / 2;
  for (int b = 0; b < in.n; ++b)
    for (int c = 0; c < in.c; ++c) {
      const double* wc = w.data() + static_cast<size_t>(c) * ksz * ksz;
      for (int u = 0; u < ksz; ++u)
        for (int y = 0; y < in.h; ++y) {
          const int yy = y + u - pad;
          if (yy < 0 || yy >= in.h) continue;
          const double* irow = in.at(b, c) + static_cast<size_t>(yy) * in.w;
          double* orow = out.at(b, c) + static_cast<size_t>(y) * in.w;
          for (int vv = 0; vv < ksz; ++vv) {
            const int dx = vv - pad;
            const int x0 = dx < 0 ? -dx : 0;
            const int x1 = dx > 0 ? in.w - dx : in.w;
            if (x1 <= x0) continue;
            k::axpy(x1 - x0, wc[u * ksz + vv], irow + x0 + dx, orow + x0);
          }
        }
    }
}

void depthwise_conv_backward(const Batch& in, const std::vector<double>& w,
                             int ksz, const Batch& dout, Batch& din,
                             std::vector<double>& dw) {
  const int pad = ksz / 2;
  for (int b = 0; b < in.n; ++b)
    for (int c = 0; c < in.c; ++c) {
      const double* wc = w.data() + static_cast<size_t>(c) * ksz * ksz;
      double* dwc = dw.data() + static_cast<size_t>(c) * ksz * ksz;
      for (int u = 0; u < ksz; ++u)
        for (int y = 0; y < in.h; ++y) {
          const int yy = y + u - pad;
          if (yy < 0 || yy >= in.h) continue;
          const double* irow = in.at(b, c) + static_cast<size_t>(yy) * in.w;
          double* dirow = din.at(b, c) + static_cast<size_t>(yy) * in.w;
          const double* dorow =
              dout.at(b, c) + static_cast<size_t>(y) * in.w;
          for (int vv = 0; vv < ksz; ++vv) {
            const int dx = vv - pad;
            const int x0 = dx < 0 ? -dx : 0;
            const int x1 = dx > 0 ? in.w - dx : in.w;
            if (x1 <= x0) continue;
            k::axpy(x1 - x0, wc[u * ksz + vv], dorow + x0, dirow + x0 + dx);
            dwc[u * ksz + vv] += k::dot(x1 - x0, dorow + x0, irow + x0 + dx);
          }
        }
    }
}

void pointwise_conv(const Batch& in, const std::vector<double>& w,
                    Batch& out) {
  out = Batch(in.n, in.c, in.h, in.w);
  const size_t plane = in.plane();
  const int C = in.c;
  for (int b = 0; b < in.n; ++b)
    for (int co = 0; co < C; ++co) {
      double* orow = out.at(b, co);
      const double* wr = w.data() + static_cast<size_t>(co) * C;
      for (int ci = 0; ci < C; ++ci) k::axpy(plane, wr[ci], in.at(b, ci), orow);
    }
}

void pointwise_conv_backward(const Batch& in, const std::vector<double>& w,
                             const Batch& dout, Batch& din,
                             std::vector<double>& dw) {
  const size_t plane = in.plane();
  const int C = in.c;
  for (int b = 0; b < in.n; ++b)
    for (int co = 0; co < C; ++co) {
      const double* dorow = dout.at(b, co);
      const double* wr = w.data() + static_cast<size_t>(co) * C;
      double* dwr = dw.data() + static_cast<size_t>(co) * C;
      for (int ci = 0; ci < C; ++ci) {
        dwr[ci] += k::dot(plane, dorow, in.at(b, ci));
        k::axpy(plane, wr[ci], dorow, din.at(b, ci));
      }
    }
}

void avg_pool3(const Batch& in, Batch& out) {
  out = Batch(in.n, in.c, in.h, in.w);
  // 3x3 window, zero padding, every tap divided by 9
  const double inv = 1.0 / 9.0;
  for (int b = 0; b < in.n; ++b)
    for (int c = 0; c < in.c; ++c)
      for (int u = 0; u < 3; ++u)
        for (int y = 0; y < in.h; ++y) {
          const int yy = y + u - 1;
          if (yy < 0 || yy >= in.h) continue;
          const double* irow = in.at(b, c) + static_cast<size_t>(yy) * in.w;
          double* orow = out.at(b, c) + static_cast<size_t>(y) * in.w;
          for (int vv = 0; vv < 3; ++vv) {
            const int dx = vv - 1;
            const int x0 = dx < 0 ? -dx : 0;
            const int x1 = dx > 0 ? in.w - dx : in.w;
            if (x1 <= x0) continue;
            k::axpy(x1 - x0, inv, irow + x0 + dx, orow + x0);
          }
        }
}

void avg_pool3_backward(const Batch& dout, Batch& din) {
  const double inv = 1.0 / 9.0;
  for (int b = 0; b < dout.n; ++b)
    for (int c = 0; c < dout.c; ++c)
      for (int u = 0; u < 3; ++u)
        for (int y = 0; y < dout.h; ++y) {
          const int yy = y + u - 1;
          if (yy < 0 || yy >= dout.h) continue;
          double* dirow = din.at(b, c) + static_cast<size_t>(yy) * dout.w;
          const double* dorow =
              dout.at(b, c) + static_cast<size_t>(y) * dout.w;
          for (int vv = 0; vv < 3; ++vv) {
            const int dx = vv - 1;
            const int x0 = dx < 0 ? -dx : 0;
            const int x1 = dx > 0 ? dout.w - dx : dout.w;
            if (x1 <= x0) continue;
            k::axpy(x1 - x0, inv, dorow + x0, dirow + x0 + dx);
          }
        }
}

void max_pool3(const Batch& in, Batch& out, std::vector<int>& argmax) {
  out = Batch(in.n, in.c, in.h, in.w);
  // max over the taps that fall inside the map; ties keep the first tap
  argmax.assign(in.size(), 0);
  const size_t plane = in.plane();
  for (int b = 0; b < in.n; ++b)
    for (int c = 0; c < in.c; ++c) {
      const double* ip = in.at(b, c);
      double* op = out.at(b, c);
      int* ap = argmax.data() +
                (static_cast<size_t>(b) * in.c + c) * plane;
      for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) {
          double best = -std::numeric_limits<double>::infinity();
          int best_idx = 0;
          for (int u = -1; u <= 1; ++u) {
            const int yy = y + u;
            if (yy < 0 || yy >= in.h) continue;
            for (int vv = -1; vv <= 1; ++vv) {
              const int xx = x + vv;
              if (xx < 0 || xx >= in.w) continue;
              const int idx = yy * in.w + xx;
              if (ip[idx] > best) {
                best = ip[idx];
                best_idx = idx;
              }
            }
          }
          op[y * in.w + x] = best;
          ap[y * in.w + x] = best_idx;
        }
    }
}

void max_pool3_backward(const Batch& dout, const std::vector<int>& argmax,
                        Batch& din) {
  const size_t plane = dout.plane();
  for (int b = 0; b < dout.n; ++b)
    for (int c = 0; c < dout.c; ++c) {
      const double* dop = dout.at(b, c);
      double* dip = din.at(b, c);
      const int* ap = argmax.data() +
                      (static_cast<size_t>(b) * dout.c + c) * plane;
      for (size_t i = 0; i < plane; ++i) dip[ap[i]] += dop[i];
    }
}

// Captures the statistics actually used into the tape, then applies the
// normalization.  train mode refreshes the running statistics afterwards so
// the captured values stay valid for the backward pass.
void norm_apply(NormState& ns, const Batch& u, StatsMode mode, OpTape& tp,
                Batch& out) {
  const int C = u.c;
  const size_t plane = u.plane();
  if (mode == StatsMode::recalibrate) {
    for (int c = 0; c < C; ++c) {
      double sx = 0.0, sxx = 0.0;
      for (int b = 0; b < u.n; ++b) {
        const double* row = u.at(b, c);
        sx += k::sum(plane, row);
        sxx += k::dot(plane, row, row);
      }
      const double n = static_cast<double>(u.n) * plane;
      const double m = sx / n;
      ns.mean[c] = f32(m);
      ns.var[c] = f32(std::max(0.0, sxx / n - m * m));
    }
  }
  tp.mean.resize(C);
  tp.inv_std.resize(C);
  tp.scale.resize(C);
  out = Batch(u.n, u.c, u.h, u.w);
  for (int c = 0; c < C; ++c) {
    tp.mean[c] = ns.mean[c];
    tp.inv_std[c] = 1.0 / std::sqrt(ns.var[c] + kNormEps);
    tp.scale[c] = ns.gamma[c] * tp.inv_std[c];
    const double shift = ns.beta[c] - ns.mean[c] * tp.scale[c];
    for (int b = 0; b < u.n; ++b)
      k::affine(plane, tp.scale[c], shift, u.at(b, c), out.at(b, c));
  }
  if (mode == StatsMode::train) {
    for (int c = 0; c < C; ++c) {
      double sx = 0.0, sxx = 0.0;
      for (int b = 0; b < u.n; ++b) {
        const double* row = u.at(b, c);
        sx += k::sum(plane, row);
        sxx += k::dot(plane, row, row);
      }
      const double n = static_cast<double>(u.n) * plane;
      const double m = sx / n;
      const double var = std::max(0.0, sxx / n - m * m);
      ns.mean[c] = f32((1.0 - kStatMomentum) * ns.mean[c] + kStatMomentum * m);
      ns.var[c] = f32((1.0 - kStatMomentum) * ns.var[c] + kStatMomentum * var);
    }
  }
}

// du = dout * scale; accumulates dgamma/dbeta from the applied statistics
void norm_backward(const OpTape& tp, const Batch& u, const Batch& dout,
                   Batch& du, std::vector<double>& dgamma,
                   std::vector<double>& dbeta) {
  const int C = u.c;
  const size_t plane = u.plane();
  du = Batch(u.n, u.c, u.h, u.w);
  for (int c = 0; c < C; ++c) {
    double sdy = 0.0, sdyu = 0.0;
    for (int b = 0; b < u.n; ++b) {
      const double* dorow = dout.at(b, c);
      sdy += k::sum(plane, dorow);
      sdyu += k::dot(plane, dorow, u.at(b, c));
      k::affine(plane, tp.scale[c], 0.0, dorow, du.at(b, c));
    }
    dgamma[c] += tp.inv_std[c] * (sdyu - tp.mean[c] * sdy);
    dbeta[c] += sdy;
  }
}

void op_forward(OpParams& p, const Batch& x, StatsMode mode, OpTape& tp) {
  switch (p.kind) {
    case OpKind::zero:
      tp.out = Batch(x.n, x.c, x.h, x.w);
      return;
    case OpKind::skip_connect:
      tp.out = x;
      return;
    case OpKind::sep_conv_3x3:
    case OpKind::sep_conv_5x5: {
      const int ksz = space::op_kernel_size(p.kind);
      tp.r = Batch(x.n, x.c, x.h, x.w);
      k::relu(x.size(), x.v.data(), tp.r.v.data());
      depthwise_conv(tp.r, p.dw, ksz, tp.t);
      pointwise_conv(tp.t, p.pw, tp.u);
      norm_apply(p.norm, tp.u, mode, tp, tp.out);
      return;
    }
    case OpKind::avg_pool_3x3:
      avg_pool3(x, tp.u);
      norm_apply(p.norm, tp.u, mode, tp, tp.out);
      return;
    case OpKind::max_pool_3x3:
      max_pool3(x, tp.u, tp.argmax);
      norm_apply(p.norm, tp.u, mode, tp, tp.out);
      return;
  }
}

void ensure_op_grads(const OpParams& p, OpGrads& g) {
  if (space::op_has_kernel(p.kind)) {
    if (g.dw.size() != p.dw.size()) g.dw.assign(p.dw.size(), 0.0);
    if (g.pw.size() != p.pw.size()) g.pw.assign(p.pw.size(), 0.0);
  }
  if (space::op_has_norm(p.kind)) {
    if (g.gamma.size() != p.norm.gamma.size())
      g.gamma.assign(p.norm.gamma.size(), 0.0);
    if (g.beta.size() != p.norm.beta.size())
      g.beta.assign(p.norm.beta.size(), 0.0);
  }
}

// accumulates input gradients into dx and parameter gradients into g
void op_backward(const OpParams& p, const Batch& x, const OpTape& tp,
                 const Batch& dout, Batch& dx, OpGrads& g) {
  switch (p.kind) {
    case OpKind::zero:
      return;
    case OpKind::skip_connect:
      k::axpy(dx.size(), 1.0, dout.v.data(), dx.v.data());
      return;
    case OpKind::sep_conv_3x3:
    case OpKind::sep_conv_5x5: {
      const int ksz = space::op_kernel_size(p.kind);
      Batch du, dt(x.n, x.c, x.h, x.w), dr(x.n, x.c, x.h, x.w);
      norm_backward(tp, tp.u, dout, du, g.gamma, g.beta);
      pointwise_conv_backward(tp.t, p.pw, du, dt, g.pw);
      depthwise_conv_backward(tp.r, p.dw, ksz, dt, dr, g.dw);
      k::relu_backward(x.size(), x.v.data(), dr.v.data(), dx.v.data());
      return;
    }
    case OpKind::avg_pool_3x3: {
      Batch du;
      norm_backward(tp, tp.u, dout, du, g.gamma, g.beta);
      avg_pool3_backward(du, dx);
      return;
    }
    case OpKind::max_pool_3x3: {
      Batch du;
      norm_backward(tp, tp.u, dout, du, g.gamma, g.beta);
      max_pool3_backward(du, tp.argmax, dx);
      return;
    }
  }
}

void stem_forward(const ModelView& v, const Batch& x, Batch& out) {
  const SearchSpace& s = *v.space;
  const int C = s.channel_width;
  const int Cin = s.input_channels;
  const size_t plane = x.plane();
  out = Batch(x.n, C, x.h, x.w);
  for (int b = 0; b < x.n; ++b)
    for (int co = 0; co < C; ++co) {
      double* orow = out.at(b, co);
      std::fill(orow, orow + plane, (*v.stem_b)[co]);
      for (int ci = 0; ci < Cin; ++ci)
        k::axpy(plane, (*v.stem_w)[static_cast<size_t>(co) * Cin + ci],
                x.at(b, ci), orow);
    }
}

void stem_backward(const ModelView& v, const Batch& x, const Batch& dout,
                   std::vector<double>& dw, std::vector<double>& db) {
  const SearchSpace& s = *v.space;
  const int C = s.channel_width;
  const int Cin = s.input_channels;
  const size_t plane = x.plane();
  for (int b = 0; b < x.n; ++b)
    for (int co = 0; co < C; ++co) {
      const double* dorow = dout.at(b, co);
      db[co] += k::sum(plane, dorow);
      for (int ci = 0; ci < Cin; ++ci)
        dw[static_cast<size_t>(co) * Cin + ci] +=
            k::dot(plane, dorow, x.at(b, ci));
    }
}

void head_forward(const ModelView& v, const Batch& last, Mat& pooled,
                  Mat& logits) {
  const SearchSpace& s = *v.space;
  const int C = s.channel_width;
  const int K = s.num_classes;
  const size_t plane = last.plane();
  const double inv = 1.0 / static_cast<double>(plane);
  pooled = Mat(last.n, C);
  for (int b = 0; b < last.n; ++b)
    for (int c = 0; c < C; ++c)
      pooled.at(b, c) = inv * k::sum(plane, last.at(b, c));
  logits = Mat(last.n, K);
  for (int b = 0; b < last.n; ++b)
    for (int kk = 0; kk < K; ++kk)
      logits.at(b, kk) =
          k::dot(C, v.cls_w->data() + static_cast<size_t>(kk) * C,
                 pooled.row(b)) +
          (*v.cls_b)[kk];
}

void head_backward(const ModelView& v, const Mat& pooled, const Mat& dlogits,
                   Batch& dlast, std::vector<double>& dcls_w,
                   std::vector<double>& dcls_b) {
  const SearchSpace& s = *v.space;
  const int C = s.channel_width;
  const int K = s.num_classes;
  const size_t plane = dlast.plane();
  const double inv = 1.0 / static_cast<double>(plane);
  Mat dpooled(pooled.rows, C);
  for (int b = 0; b < pooled.rows; ++b) {
    const double* dl = dlogits.row(b);
    for (int kk = 0; kk < K; ++kk) {
      dcls_b[kk] += dl[kk];
      k::axpy(C, dl[kk], pooled.row(b),
              dcls_w.data() + static_cast<size_t>(kk) * C);
      k::axpy(C, dl[kk], v.cls_w->data() + static_cast<size_t>(kk) * C,
              dpooled.row(b));
    }
    for (int c = 0; c < C; ++c) {
      double* drow = dlast.at(b, c);
      const double d = dpooled.at(b, c) * inv;
      for (size_t i = 0; i < plane; ++i) drow[i] += d;
    }
  }
}

}  // namespace

// ============================ path pass ============================

Mat forward_path(const ModelView& v, const Batch& x, StatsMode mode,
                 PathTape& tape) {
  const SearchSpace& s = *v.space;
  check_input(s, x);
  const int M = s.nodes_per_cell;
  const int epc = M * (M - 1) / 2;
  stem_forward(v, x, tape.stem_out);
  tape.node_vals.assign(static_cast<size_t>(s.num_cells) * M, Batch());
  tape.edge.assign(s.num_edges(), OpTape());
  const Batch* cur = &tape.stem_out;
  for (int cell = 0; cell < s.num_cells; ++cell) {
    tape.node_vals[static_cast<size_t>(cell) * M] = *cur;
    for (int j = 1; j < M; ++j) {
      Batch acc(x.n, s.channel_width, x.h, x.w);
      for (int i = 0; i < j; ++i) {
        const int e = cell * epc + edge_offset(M, i, j);
        OpTape& ot = tape.edge[e];
        op_forward(*v.edge_op[e], tape.node_vals[static_cast<size_t>(cell) * M + i],
                   mode, ot);
        k::axpy(acc.size(), 1.0, ot.out.v.data(), acc.v.data());
      }
      tape.node_vals[static_cast<size_t>(cell) * M + j] = std::move(acc);
    }
    cur = &tape.node_vals[static_cast<size_t>(cell) * M + (M - 1)];
  }
  head_forward(v, *cur, tape.pooled, tape.logits);
  return tape.logits;
}

void backward_path(const ModelView& v, const Batch& x, const PathTape& tape,
                   const Mat& dlogits, PathGrads& grads) {
  const SearchSpace& s = *v.space;
  const int M = s.nodes_per_cell;
  const int epc = M * (M - 1) / 2;
  if (grads.stem_w.size() != v.stem_w->size())
    grads.stem_w.assign(v.stem_w->size(), 0.0);
  if (grads.stem_b.size() != v.stem_b->size())
    grads.stem_b.assign(v.stem_b->size(), 0.0);
  if (grads.cls_w.size() != v.cls_w->size())
    grads.cls_w.assign(v.cls_w->size(), 0.0);
  if (grads.cls_b.size() != v.cls_b->size())
    grads.cls_b.assign(v.cls_b->size(), 0.0);
  grads.edge.resize(s.num_edges());
  for (int e = 0; e < s.num_edges(); ++e)
    ensure_op_grads(*v.edge_op[e], grads.edge[e]);

  Batch dlast(x.n, s.channel_width, x.h, x.w);
  head_backward(v, tape.pooled, dlogits, dlast, grads.cls_w, grads.cls_b);

  for (int cell = s.num_cells - 1; cell >= 0; --cell) {
    std::vector<Batch> dnodes(M);
    for (int j = 0; j < M; ++j)
      dnodes[j] = Batch(x.n, s.channel_width, x.h, x.w);
    dnodes[M - 1] = std::move(dlast);
    for (int j = M - 1; j >= 1; --j)
      for (int i = 0; i < j; ++i) {
        const int e = cell * epc + edge_offset(M, i, j);
        op_backward(*v.edge_op[e],
                    tape.node_vals[static_cast<size_t>(cell) * M + i],
                    tape.edge[e], dnodes[j], dnodes[i], grads.edge[e]);
      }
    dlast = std::move(dnodes[0]);
  }
  stem_backward(v, x, dlast, grads.stem_w, grads.stem_b);
}

// =========================== mixture pass ===========================

Mat forward_mixture(SuperNetwork& net, const MixtureParams& mix, const Batch& x,
                    StatsMode mode, MixtureTape& tape) {
  const SearchSpace& s = net.space;
  check_input(s, x);
  if (mix.num_edges != s.num_edges() || mix.num_ops != s.num_ops())
    throw std::invalid_argument("mixture shape [" +
                                std::to_string(mix.num_edges) + "x" +
                                std::to_string(mix.num_ops) +
                                "] does not match the space");
  const int M = s.nodes_per_cell;
  const int epc = M * (M - 1) / 2;
  const int K = s.num_ops();

  ModelView v;  // head/stem plumbing only
  v.space = &net.space;
  v.stem_w = &net.stem_w;
  v.stem_b = &net.stem_b;
  v.cls_w = &net.cls_w;
  v.cls_b = &net.cls_b;

  stem_forward(v, x, tape.stem_out);
  tape.node_vals.assign(static_cast<size_t>(s.num_cells) * M, Batch());
  tape.edge_ops.assign(s.num_edges(), std::vector<OpTape>(K));
  tape.probs.assign(s.num_edges(), {});
  const Batch* cur = &tape.stem_out;
  for (int cell = 0; cell < s.num_cells; ++cell) {
    tape.node_vals[static_cast<size_t>(cell) * M] = *cur;
    for (int j = 1; j < M; ++j) {
      Batch acc(x.n, s.channel_width, x.h, x.w);
      for (int i = 0; i < j; ++i) {
        const int e = cell * epc + edge_offset(M, i, j);
        std::vector<double> row(mix.row(e), mix.row(e) + K);
        tape.probs[e] = space::mixture_weights(row);
        for (int o = 0; o < K; ++o) {
          OpTape& ot = tape.edge_ops[e][o];
          op_forward(net.edge_ops[e][o],
                     tape.node_vals[static_cast<size_t>(cell) * M + i], mode,
                     ot);
          k::axpy(acc.size(), tape.probs[e][o], ot.out.v.data(),
                  acc.v.data());
        }
      }
      tape.node_vals[static_cast<size_t>(cell) * M + j] = std::move(acc);
    }
    cur = &tape.node_vals[static_cast<size_t>(cell) * M + (M - 1)];
  }
  head_forward(v, *cur, tape.pooled, tape.logits);
  return tape.logits;
}

void backward_mixture(SuperNetwork& net, const MixtureParams&,
                      const Batch& x, const MixtureTape& tape,
                      const Mat& dlogits, MixtureGrads& grads) {
  const SearchSpace& s = net.space;
  const int M = s.nodes_per_cell;
  const int epc = M * (M - 1) / 2;
  const int K = s.num_ops();

  ModelView v;
  v.space = &net.space;
  v.stem_w = &net.stem_w;
  v.stem_b = &net.stem_b;
  v.cls_w = &net.cls_w;
  v.cls_b = &net.cls_b;

  grads.stem_w.assign(net.stem_w.size(), 0.0);
  grads.stem_b.assign(net.stem_b.size(), 0.0);
  grads.cls_w.assign(net.cls_w.size(), 0.0);
  grads.cls_b.assign(net.cls_b.size(), 0.0);
  grads.edge_ops.assign(s.num_edges(), std::vector<OpGrads>(K));
  for (int e = 0; e < s.num_edges(); ++e)
    for (int o = 0; o < K; ++o)
      ensure_op_grads(net.edge_ops[e][o], grads.edge_ops[e][o]);
  grads.alpha.assign(static_cast<size_t>(s.num_edges()) * K, 0.0);

  Batch dlast(x.n, s.channel_width, x.h, x.w);
  head_backward(v, tape.pooled, dlogits, dlast, grads.cls_w, grads.cls_b);

  for (int cell = s.num_cells - 1; cell >= 0; --cell) {
    std::vector<Batch> dnodes(M);
    for (int j = 0; j < M; ++j)
      dnodes[j] = Batch(x.n, s.channel_width, x.h, x.w);
    dnodes[M - 1] = std::move(dlast);
    for (int j = M - 1; j >= 1; --j)
      for (int i = 0; i < j; ++i) {
        const int e = cell * epc + edge_offset(M, i, j);
        const Batch& dedge = dnodes[j];
        const std::vector<double>& p = tape.probs[e];
        // dL/d(prob_o) before the softmax jacobian
        std::vector<double> gdot(K);
        Batch scaled(x.n, s.channel_width, x.h, x.w);
        for (int o = 0; o < K; ++o) {
          const OpTape& ot = tape.edge_ops[e][o];
          gdot[o] = k::dot(dedge.size(), dedge.v.data(), ot.out.v.data());
          scaled.zero();
          k::axpy(scaled.size(), p[o], dedge.v.data(), scaled.v.data());
          op_backward(net.edge_ops[e][o],
                      tape.node_vals[static_cast<size_t>(cell) * M + i], ot,
                      scaled, dnodes[i], grads.edge_ops[e][o]);
        }
        double dot_pg = 0.0;
        for (int o = 0; o < K; ++o) dot_pg += p[o] * gdot[o];
        double* arow = grads.alpha.data() + static_cast<size_t>(e) * K;
        for (int o = 0; o < K; ++o) arow[o] += p[o] * (gdot[o] - dot_pg);
      }
    dlast = std::move(dnodes[0]);
  }
  stem_backward(v, x, dlast, grads.stem_w, grads.stem_b);
}

// ============================ optimizer ============================

namespace {

void vel_for(const OpParams& p, OpVel& v) {
  if (space::op_has_kernel(p.kind)) {
    v.dw.assign(p.dw.size(), 0.0);
    v.pw.assign(p.pw.size(), 0.0);
  }
  if (space::op_has_norm(p.kind)) {
    v.gamma.assign(p.norm.gamma.size(), 0.0);
    v.beta.assign(p.norm.beta.size(), 0.0);
  }
}

}  // namespace

void sgd_init(SgdState& st, const SuperNetwork& net) {
  st.stem_w.assign(net.stem_w.size(), 0.0);
  st.stem_b.assign(net.stem_b.size(), 0.0);
  st.cls_w.assign(net.cls_w.size(), 0.0);
  st.cls_b.assign(net.cls_b.size(), 0.0);
  st.edge.assign(net.space.num_edges(),
                 std::vector<OpVel>(net.space.num_ops()));
  for (int e = 0; e < net.space.num_edges(); ++e)
    for (int o = 0; o < net.space.num_ops(); ++o)
      vel_for(net.edge_ops[e][o], st.edge[e][o]);
}

void sgd_init(SgdState& st, const Subnet& sub) {
  st.stem_w.assign(sub.stem_w.size(), 0.0);
  st.stem_b.assign(sub.stem_b.size(), 0.0);
  st.cls_w.assign(sub.cls_w.size(), 0.0);
  st.cls_b.assign(sub.cls_b.size(), 0.0);
  st.edge.assign(sub.space.num_edges(), std::vector<OpVel>(1));
  for (int e = 0; e < sub.space.num_edges(); ++e)
    vel_for(sub.ops[e], st.edge[e][0]);
}

namespace {

unsigned long long apply_block(std::vector<double>& w,
                               const std::vector<double>& g,
                               std::vector<double>& v, double lr,
                               double momentum, double wd) {
  k::sgd_update(w.size(), w.data(), g.data(), v.data(), lr, momentum, wd);
  return w.size();
}

}  // namespace

unsigned long long sgd_apply_path(const ModelView& v, const PathGrads& grads,
                                  SgdState& st, double lr, double momentum,
                                  double wd, const TrainOptions& opts) {
  unsigned long long updated = 0;
  if (opts.train_backbone) {
    updated += apply_block(*v.stem_w, grads.stem_w, st.stem_w, lr, momentum, wd);
    updated += apply_block(*v.stem_b, grads.stem_b, st.stem_b, lr, momentum, wd);
    for (int e = 0; e < v.space->num_edges(); ++e) {
      OpParams& p = *v.edge_op[e];
      OpVel& vel = st.edge[e][v.edge_slot[e]];
      const OpGrads& g = grads.edge[e];
      if (space::op_has_kernel(p.kind)) {
        updated += apply_block(p.dw, g.dw, vel.dw, lr, momentum, wd);
        updated += apply_block(p.pw, g.pw, vel.pw, lr, momentum, wd);
      }
      if (space::op_has_norm(p.kind)) {
        updated += apply_block(p.norm.gamma, g.gamma, vel.gamma, lr, momentum, wd);
        updated += apply_block(p.norm.beta, g.beta, vel.beta, lr, momentum, wd);
      }
    }
  }
  if (opts.train_classifier) {
    updated += apply_block(*v.cls_w, grads.cls_w, st.cls_w, lr, momentum, wd);
    updated += apply_block(*v.cls_b, grads.cls_b, st.cls_b, lr, momentum, wd);
  }
  return updated;
}

Batch gather_batch(const LabeledDataset& data, const std::vector<int>& order,
                   size_t start, int count, std::vector<int>* labels) {
  Batch x(count, data.channels, data.height, data.width);
  const int dims = data.feature_dims();
  if (labels) labels->resize(count);
  for (int i = 0; i < count; ++i) {
    const int idx = order[start + i];
    std::memcpy(x.v.data() + static_cast<size_t>(i) * dims,
                data.example(idx), sizeof(double) * dims);
    if (labels) (*labels)[i] = data.labels[idx];
  }
  return x;
}

}  // namespace ltnas::engine
