#include "coordsr/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <memory>
#include <string>

#include "coordsr/errors.hpp"

namespace coordsr::ops {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void require(bool cond, const std::string& what) {
  if (!cond) throw ConfigError(what);
}

void same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw UsageError("operands recorded on different tapes");
}

// columns [Cin*k*k, H*W] for one batch item
void im2col(const float* img, int cin, int h, int w, int k, float* cols) {
  const int pad = k / 2;
  const int hw = h * w;
  for (int c = 0; c < cin; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        float* row = cols + static_cast<std::size_t>((c * k + ky) * k + kx) * hw;
        const float* src = img + static_cast<std::size_t>(c) * hw;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - pad;
          float* dst = row + static_cast<std::size_t>(y) * w;
          if (sy < 0 || sy >= h) {
            std::fill(dst, dst + w, 0.0f);
            continue;
          }
          const float* srow = src + static_cast<std::size_t>(sy) * w;
          for (int x = 0; x < w; ++x) {
            const int sx = x + kx - pad;
            dst[x] = (sx >= 0 && sx < w) ? srow[sx] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im_add(const float* cols, int cin, int h, int w, int k, float* img) {
  const int pad = k / 2;
  const int hw = h * w;
  for (int c = 0; c < cin; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const float* row = cols + static_cast<std::size_t>((c * k + ky) * k + kx) * hw;
        float* dst = img + static_cast<std::size_t>(c) * hw;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= h) continue;
          const float* srow = row + static_cast<std::size_t>(y) * w;
          float* drow = dst + static_cast<std::size_t>(sy) * w;
          for (int x = 0; x < w; ++x) {
            const int sx = x + kx - pad;
            if (sx >= 0 && sx < w) drow[sx] += srow[x];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(Var input, Var kernel, Var bias) {
  same_tape(input, kernel);
  same_tape(input, bias);
  const Shape& xs = input.shape();
  const Shape& ks = kernel.shape();
  const Shape& bs = bias.shape();
  require(xs.size() == 4, "conv2d input must be [N,C,H,W], got " + shape_str(xs));
  require(ks.size() == 4 && ks[2] == ks[3] && ks[2] % 2 == 1,
          "conv2d kernel must be [Cout,Cin,k,k] with odd k, got " + shape_str(ks));
  require(ks[1] == xs[1], "conv2d channel mismatch: input " + shape_str(xs) + " kernel " +
                              shape_str(ks));
  require(bs.size() == 1 && bs[0] == ks[0], "conv2d bias must be [Cout], got " + shape_str(bs));

  const int n = xs[0], cin = xs[1], h = xs[2], w = xs[3];
  const int cout = ks[0], k = ks[2];
  const int kdim = cin * k * k;
  const int hw = h * w;
  Tape& tape = input.tape();
  const bool keep_cols = tape.needs_grad(kernel);

  auto cols_cache = std::make_shared<std::vector<std::vector<float>>>();
  std::vector<float> cols(static_cast<std::size_t>(kdim) * hw);
  Tensor out({n, cout, h, w});
  const ConstMapMat wmat(kernel.value().data().data(), cout, kdim);
  const auto bvec = bias.value().data();
  for (int b = 0; b < n; ++b) {
    im2col(input.value().data().data() + static_cast<std::size_t>(b) * cin * hw, cin, h, w, k,
           cols.data());
    MapMat o(out.data().data() + static_cast<std::size_t>(b) * cout * hw, cout, hw);
    o.noalias() = wmat * ConstMapMat(cols.data(), kdim, hw);
    for (int c = 0; c < cout; ++c) o.row(c).array() += bvec[c];
    if (keep_cols) cols_cache->push_back(cols);
  }

  return tape.record(
      "conv2d", std::move(out), {input, kernel, bias},
      [=](Tape& t, const Tensor& g) {
        const float* gy = g.data().data();
        if (t.needs_grad(bias)) {
          Tensor& gb = t.grad_accumulator(bias);
          for (int b = 0; b < n; ++b) {
            for (int c = 0; c < cout; ++c) {
              const float* row = gy + (static_cast<std::size_t>(b) * cout + c) * hw;
              double s = 0.0;
              for (int i = 0; i < hw; ++i) s += row[i];
              gb[c] += static_cast<float>(s);
            }
          }
        }
        if (t.needs_grad(kernel)) {
          MapMat gw(t.grad_accumulator(kernel).data().data(), cout, kdim);
          for (int b = 0; b < n; ++b) {
            const ConstMapMat gyb(gy + static_cast<std::size_t>(b) * cout * hw, cout, hw);
            gw.noalias() += gyb * ConstMapMat((*cols_cache)[b].data(), kdim, hw).transpose();
          }
        }
        if (t.needs_grad(input)) {
          float* gx = t.grad_accumulator(input).data().data();
          const ConstMapMat wm(t.value(kernel).data().data(), cout, kdim);
          RowMat gcols(kdim, hw);
          for (int b = 0; b < n; ++b) {
            const ConstMapMat gyb(gy + static_cast<std::size_t>(b) * cout * hw, cout, hw);
            gcols.noalias() = wm.transpose() * gyb;
            col2im_add(gcols.data(), cin, h, w, k, gx + static_cast<std::size_t>(b) * cin * hw);
          }
        }
      });
}

Var linear(Var input, Var weight, Var bias) {
  same_tape(input, weight);
  same_tape(input, bias);
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  const Shape& bs = bias.shape();
  require(!xs.empty(), "linear input must have rank >= 1");
  require(ws.size() == 2, "linear weight must be [out,in], got " + shape_str(ws));
  require(xs.back() == ws[1], "linear inner dims differ: input " + shape_str(xs) + " weight " +
                                  shape_str(ws));
  require(bs.size() == 1 && bs[0] == ws[0], "linear bias must be [out], got " + shape_str(bs));

  const int in = ws[1], outd = ws[0];
  const int m = static_cast<int>(input.value().numel() / static_cast<std::size_t>(in));
  Shape os = xs;
  os.back() = outd;
  Tensor out(os);
  {
    const ConstMapMat x(input.value().data().data(), m, in);
    const ConstMapMat wm(weight.value().data().data(), outd, in);
    MapMat y(out.data().data(), m, outd);
    y.noalias() = x * wm.transpose();
    const Eigen::Map<const Eigen::RowVectorXf> b(bias.value().data().data(), outd);
    y.rowwise() += b;
  }
  Tape& tape = input.tape();
  return tape.record("linear", std::move(out), {input, weight, bias},
                     [=](Tape& t, const Tensor& g) {
                       const ConstMapMat gy(g.data().data(), m, outd);
                       if (t.needs_grad(bias)) {
                         Tensor& gb = t.grad_accumulator(bias);
                         std::vector<double> s(static_cast<std::size_t>(outd), 0.0);
                         for (int i = 0; i < m; ++i) {
                           const float* row = g.data().data() + static_cast<std::size_t>(i) * outd;
                           for (int o = 0; o < outd; ++o) s[o] += row[o];
                         }
                         for (int o = 0; o < outd; ++o) gb[o] += static_cast<float>(s[o]);
                       }
                       if (t.needs_grad(weight)) {
                         MapMat gw(t.grad_accumulator(weight).data().data(), outd, in);
                         const ConstMapMat x(t.value(input).data().data(), m, in);
                         gw.noalias() += gy.transpose() * x;
                       }
                       if (t.needs_grad(input)) {
                         MapMat gx(t.grad_accumulator(input).data().data(), m, in);
                         const ConstMapMat wm(t.value(weight).data().data(), outd, in);
                         gx.noalias() += gy * wm;
                       }
                     });
}

Var relu(Var x) {
  Tensor out = x.value();
  out.set_requires_grad(false);
  for (float& v : out.data()) v = v > 0.0f ? v : 0.0f;
  return x.tape().record("relu", std::move(out), {x}, [=](Tape& t, const Tensor& g) {
    if (!t.needs_grad(x)) return;
    float* gx = t.grad_accumulator(x).data().data();
    const float* xv = t.value(x).data().data();
    const float* gv = g.data().data();
    const std::size_t n = g.numel();
    for (std::size_t i = 0; i < n; ++i) gx[i] += xv[i] > 0.0f ? gv[i] : 0.0f;
  });
}

Var add(Var a, Var b) { return add_scaled(a, b, 1.0f); }

Var add_scaled(Var a, Var b, float s) {
  same_tape(a, b);
  require(a.shape() == b.shape(),
          "add shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor out(a.shape());
  const auto av = a.value().data();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] + s * bv[i];
  return a.tape().record(s == 1.0f ? "add" : "add_scaled", std::move(out), {a, b},
                         [=](Tape& t, const Tensor& g) {
                           if (t.needs_grad(a)) t.accumulate(a, g);
                           if (t.needs_grad(b)) {
                             Tensor& gb = t.grad_accumulator(b);
                             for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] += s * g[i];
                           }
                         });
}

Var mul(Var a, Var b) {
  same_tape(a, b);
  require(a.shape() == b.shape(),
          "mul shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor out(a.shape());
  const auto av = a.value().data();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] * bv[i];
  return a.tape().record("mul", std::move(out), {a, b}, [=](Tape& t, const Tensor& g) {
    const auto av2 = t.value(a).data();
    const auto bv2 = t.value(b).data();
    if (t.needs_grad(a)) {
      Tensor& ga = t.grad_accumulator(a);
      for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g[i] * bv2[i];
    }
    if (t.needs_grad(b)) {
      Tensor& gb = t.grad_accumulator(b);
      for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] += g[i] * av2[i];
    }
  });
}

Var scale(Var x, float s) {
  Tensor out(x.shape());
  const auto xv = x.value().data();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = s * xv[i];
  return x.tape().record("scale", std::move(out), {x}, [=](Tape& t, const Tensor& g) {
    if (!t.needs_grad(x)) return;
    Tensor& gx = t.grad_accumulator(x);
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += s * g[i];
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (float v : x.value().data()) s += v;
  return x.tape().record("sum", Tensor::scalar(static_cast<float>(s)), {x},
                         [=](Tape& t, const Tensor& g) {
                           if (!t.needs_grad(x)) return;
                           Tensor& gx = t.grad_accumulator(x);
                           for (float& v : gx.data()) v += g[0];
                         });
}

Var mean_abs_error(Var pred, const Tensor& target) {
  require(pred.shape() == target.shape(), "mean_abs_error shape mismatch: " +
                                              shape_str(pred.shape()) + " vs " +
                                              shape_str(target.shape()));
  const auto p = pred.value().data();
  const auto q = target.data();
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(static_cast<double>(p[i]) - q[i]);
  const double n = static_cast<double>(p.size());
  auto tgt = std::make_shared<Tensor>(target);
  return pred.tape().record(
      "mean_abs_error", Tensor::scalar(static_cast<float>(s / n)), {pred},
      [=](Tape& t, const Tensor& g) {
        if (!t.needs_grad(pred)) return;
        Tensor& gp = t.grad_accumulator(pred);
        const auto pv = t.value(pred).data();
        const float step = static_cast<float>(g[0] / n);
        for (std::size_t i = 0; i < gp.numel(); ++i) {
          const float d = pv[i] - (*tgt)[i];
          gp[i] += d > 0.0f ? step : (d < 0.0f ? -step : 0.0f);
        }
      });
}

Var mean_squared_error(Var pred, const Tensor& target) {
  require(pred.shape() == target.shape(), "mean_squared_error shape mismatch: " +
                                              shape_str(pred.shape()) + " vs " +
                                              shape_str(target.shape()));
  const auto p = pred.value().data();
  const auto q = target.data();
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(p[i]) - q[i];
    s += d * d;
  }
  const double n = static_cast<double>(p.size());
  auto tgt = std::make_shared<Tensor>(target);
  return pred.tape().record(
      "mean_squared_error", Tensor::scalar(static_cast<float>(s / n)), {pred},
      [=](Tape& t, const Tensor& g) {
        if (!t.needs_grad(pred)) return;
        Tensor& gp = t.grad_accumulator(pred);
        const auto pv = t.value(pred).data();
        const float c = static_cast<float>(2.0 * g[0] / n);
        for (std::size_t i = 0; i < gp.numel(); ++i) gp[i] += c * (pv[i] - (*tgt)[i]);
      });
}

Var to_rows(Var nchw) {
  const Shape& s = nchw.shape();
  require(s.size() == 4, "to_rows expects [N,C,H,W], got " + shape_str(s));
  const int n = s[0], c = s[1], hw = s[2] * s[3];
  Tensor out({n * hw, c});
  const auto x = nchw.value().data();
  for (int b = 0; b < n; ++b)
    for (int ch = 0; ch < c; ++ch)
      for (int i = 0; i < hw; ++i)
        out[(static_cast<std::size_t>(b) * hw + i) * c + ch] =
            x[(static_cast<std::size_t>(b) * c + ch) * hw + i];
  return nchw.tape().record("to_rows", std::move(out), {nchw}, [=](Tape& t, const Tensor& g) {
    if (!t.needs_grad(nchw)) return;
    Tensor& gx = t.grad_accumulator(nchw);
    for (int b = 0; b < n; ++b)
      for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < hw; ++i)
          gx[(static_cast<std::size_t>(b) * c + ch) * hw + i] +=
              g[(static_cast<std::size_t>(b) * hw + i) * c + ch];
  });
}

Var from_rows(Var rows, int n, int h, int w) {
  const Shape& s = rows.shape();
  require(s.size() == 2 && s[0] == n * h * w,
          "from_rows expects [N*H*W, C], got " + shape_str(s));
  const int c = s[1], hw = h * w;
  Tensor out({n, c, h, w});
  const auto x = rows.value().data();
  for (int b = 0; b < n; ++b)
    for (int ch = 0; ch < c; ++ch)
      for (int i = 0; i < hw; ++i)
        out[(static_cast<std::size_t>(b) * c + ch) * hw + i] =
            x[(static_cast<std::size_t>(b) * hw + i) * c + ch];
  return rows.tape().record("from_rows", std::move(out), {rows}, [=](Tape& t, const Tensor& g) {
    if (!t.needs_grad(rows)) return;
    Tensor& gx = t.grad_accumulator(rows);
    for (int b = 0; b < n; ++b)
      for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < hw; ++i)
          gx[(static_cast<std::size_t>(b) * hw + i) * c + ch] +=
              g[(static_cast<std::size_t>(b) * c + ch) * hw + i];
  });
}

Var pixel_shuffle(Var x, int r) {
  const Shape& s = x.shape();
  require(r >= 1, "pixel_shuffle factor must be >= 1");
  require(s.size() == 4 && s[1] % (r * r) == 0,
          "pixel_shuffle expects [N, C*r*r, H, W], got " + shape_str(s));
  const int n = s[0], c = s[1] / (r * r), h = s[2], w = s[3];
  const int oh = h * r, ow = w * r;
  // flat source index for every destination element
  auto index = std::make_shared<std::vector<std::size_t>>(static_cast<std::size_t>(n) * c * oh * ow);
  std::size_t o = 0;
  for (int b = 0; b < n; ++b)
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
          const int src_c = ch * r * r + (y % r) * r + (xx % r);
          (*index)[o++] = ((static_cast<std::size_t>(b) * s[1] + src_c) * h + y / r) * w + xx / r;
        }
  Tensor out({n, c, oh, ow});
  const auto xv = x.value().data();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = xv[(*index)[i]];
  return x.tape().record("pixel_shuffle", std::move(out), {x}, [=](Tape& t, const Tensor& g) {
    if (!t.needs_grad(x)) return;
    Tensor& gx = t.grad_accumulator(x);
    for (std::size_t i = 0; i < g.numel(); ++i) gx[(*index)[i]] += g[i];
  });
}

Var gather_codes(Var features, const EnsembleGeometry& geom, bool with_offsets) {
  const Shape& s = features.shape();
  require(s.size() == 4 && s[2] == geom.grid_rows && s[3] == geom.grid_cols,
          "gather_codes: features " + shape_str(s) + " do not match the ensemble grid");
  const int n = s[0], c = s[1], hw = s[2] * s[3];
  const int q = static_cast<int>(geom.queries());
  const int width = c + (with_offsets ? 2 : 0);
  Tensor out({n * q * 4, width});
  const auto x = features.value().data();
  for (int b = 0; b < n; ++b) {
    const float* fb = x.data() + static_cast<std::size_t>(b) * c * hw;
    for (int i = 0; i < q; ++i) {
      for (int k = 0; k < 4; ++k) {
        float* row = out.data().data() + ((static_cast<std::size_t>(b) * q + i) * 4 + k) * width;
        const int cell = geom.cell[i][k];
        for (int ch = 0; ch < c; ++ch) row[ch] = fb[static_cast<std::size_t>(ch) * hw + cell];
        if (with_offsets) {
          row[c] = geom.offset[i][2 * k];
          row[c + 1] = geom.offset[i][2 * k + 1];
        }
      }
    }
  }
  auto cells = std::make_shared<std::vector<std::array<int, 4>>>(geom.cell);
  return features.tape().record(
      "gather_codes", std::move(out), {features}, [=](Tape& t, const Tensor& g) {
        if (!t.needs_grad(features)) return;
        float* gx = t.grad_accumulator(features).data().data();
        for (int b = 0; b < n; ++b) {
          float* gb = gx + static_cast<std::size_t>(b) * c * hw;
          for (int i = 0; i < q; ++i) {
            for (int k = 0; k < 4; ++k) {
              const float* row =
                  g.data().data() + ((static_cast<std::size_t>(b) * q + i) * 4 + k) * width;
              const int cell = (*cells)[i][k];
              for (int ch = 0; ch < c; ++ch) gb[static_cast<std::size_t>(ch) * hw + cell] += row[ch];
            }
          }
        }
      });
}

Var blend_neighbors(Var values, const EnsembleGeometry& geom, int batch) {
  const Shape& s = values.shape();
  const int q = static_cast<int>(geom.queries());
  require(s.size() == 2 && s[1] == 1 && s[0] == batch * q * 4,
          "blend_neighbors expects [N*Q*4, 1], got " + shape_str(s));
  Tensor out({batch, 1, geom.out_rows, geom.out_cols});
  const auto v = values.value().data();
  for (int b = 0; b < batch; ++b) {
    for (int i = 0; i < q; ++i) {
      const float* vv = v.data() + (static_cast<std::size_t>(b) * q + i) * 4;
      float acc = 0.0f;
      for (int k = 0; k < 4; ++k) acc += geom.weight[i][k] * vv[k];
      out[static_cast<std::size_t>(b) * q + i] = acc;
    }
  }
  auto weights = std::make_shared<std::vector<std::array<float, 4>>>(geom.weight);
  return values.tape().record(
      "blend_neighbors", std::move(out), {values}, [=](Tape& t, const Tensor& g) {
        if (!t.needs_grad(values)) return;
        Tensor& gv = t.grad_accumulator(values);
        for (int b = 0; b < batch; ++b)
          for (int i = 0; i < q; ++i) {
            const std::size_t qi = static_cast<std::size_t>(b) * q + i;
            for (int k = 0; k < 4; ++k) gv[qi * 4 + k] += (*weights)[i][k] * g[qi];
          }
      });
}

Var ensemble_upsample(Var cells, const EnsembleGeometry& geom) {
  const Shape& s = cells.shape();
  require(s.size() == 4 && s[1] == 1 && s[2] == geom.grid_rows && s[3] == geom.grid_cols,
          "ensemble_upsample expects [N,1,l,w] matching the grid, got " + shape_str(s));
  const int n = s[0], hw = s[2] * s[3];
  const int q = static_cast<int>(geom.queries());
  Tensor out({n, 1, geom.out_rows, geom.out_cols});
  const auto v = cells.value().data();
  for (int b = 0; b < n; ++b) {
    const float* vb = v.data() + static_cast<std::size_t>(b) * hw;
    for (int i = 0; i < q; ++i) {
      float acc = 0.0f;
      for (int k = 0; k < 4; ++k) acc += geom.weight[i][k] * vb[geom.cell[i][k]];
      out[static_cast<std::size_t>(b) * q + i] = acc;
    }
  }
  auto g_cells = std::make_shared<std::vector<std::array<int, 4>>>(geom.cell);
  auto g_weights = std::make_shared<std::vector<std::array<float, 4>>>(geom.weight);
  return cells.tape().record(
      "ensemble_upsample", std::move(out), {cells}, [=](Tape& t, const Tensor& g) {
        if (!t.needs_grad(cells)) return;
        Tensor& gc = t.grad_accumulator(cells);
        for (int b = 0; b < n; ++b)
          for (int i = 0; i < q; ++i)
            for (int k = 0; k < 4; ++k)
              gc[static_cast<std::size_t>(b) * hw + (*g_cells)[i][k]] +=
                  (*g_weights)[i][k] * g[static_cast<std::size_t>(b) * q + i];
      });
}

}  // namespace coordsr::ops
