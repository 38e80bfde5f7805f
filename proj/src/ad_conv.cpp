#include <Eigen/Dense>
#include <algorithm>
#include <cstring>
#include <vector>

#include "sp3d/autodiff.hpp"
#include "sp3d/parallel.hpp"

// Convolution ops: im2col + GEMM. Graph construction is single-threaded by
// contract (kernels parallelize internally), so the scratch buffers below are
// plain statics grown on demand.

namespace sp3d::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using StridedMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

std::vector<double>& scratch_col() {
  static std::vector<double> buf;
  return buf;
}

// C (m x n) = [+]= op(A) * op(B); A is (m x k) or (k x m) when transposed,
// row-major. Work is split over columns of C in fixed chunks.
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k,
          const double* A, const double* B, double* C, bool acc) {
  if (m == 0 || n == 0) return;
  const int64_t lda = trans_a ? m : k;
  const int64_t ldb = trans_b ? k : n;
  auto run = [&](int64_t c0, int64_t c1) {
    const int64_t nc = c1 - c0;
    StridedMap Cm(C + c0, m, nc, Eigen::OuterStride<>(n));
    ConstStridedMap Am(A, trans_a ? k : m, trans_a ? m : k, Eigen::OuterStride<>(lda));
    if (!trans_b) {
      ConstStridedMap Bm(B + c0, k, nc, Eigen::OuterStride<>(ldb));
      if (trans_a) {
        if (acc) Cm.noalias() += Am.transpose() * Bm;
        else Cm.noalias() = Am.transpose() * Bm;
      } else {
        if (acc) Cm.noalias() += Am * Bm;
        else Cm.noalias() = Am * Bm;
      }
    } else {
      ConstStridedMap Bm(B + c0 * ldb, nc, k, Eigen::OuterStride<>(ldb));
      if (trans_a) {
        if (acc) Cm.noalias() += Am.transpose() * Bm.transpose();
        else Cm.noalias() = Am.transpose() * Bm.transpose();
      } else {
        if (acc) Cm.noalias() += Am * Bm.transpose();
        else Cm.noalias() = Am * Bm.transpose();
      }
    }
  };
  const int64_t flops = m * n * k;
  if (flops < (1 << 18) || n < 2 * thread_count()) {
    run(0, n);
    return;
  }
  const int t = thread_count();
  const int64_t chunk = (n + t - 1) / t;
  parallel_for(t, [&](int64_t b, int64_t e) {
    for (int64_t s = b; s < e; ++s) {
      const int64_t c0 = s * chunk;
      const int64_t c1 = std::min<int64_t>(c0 + chunk, n);
      if (c0 < c1) run(c0, c1);
    }
  });
}

// ---- 2D ----

struct Conv2dGeom {
  int ci, h, w, kh, kw, stride, pad, ho, wo;
  int64_t rows() const { return static_cast<int64_t>(ci) * kh * kw; }
  int64_t cols() const { return static_cast<int64_t>(ho) * wo; }
};

void im2col_2d(const double* x, const Conv2dGeom& g, double* col) {
  parallel_for(g.rows(), [&](int64_t rb, int64_t re) {
    for (int64_t r = rb; r < re; ++r) {
      const int kx = static_cast<int>(r % g.kw);
      const int ky = static_cast<int>((r / g.kw) % g.kh);
      const int ci = static_cast<int>(r / (static_cast<int64_t>(g.kw) * g.kh));
      const double* xc = x + static_cast<int64_t>(ci) * g.h * g.w;
      double* dst = col + r * g.cols();
      for (int oy = 0; oy < g.ho; ++oy) {
        const int iy = oy * g.stride - g.pad + ky;
        if (iy < 0 || iy >= g.h) {
          std::fill(dst, dst + g.wo, 0.0);
          dst += g.wo;
          continue;
        }
        const double* row = xc + static_cast<int64_t>(iy) * g.w;
        for (int ox = 0; ox < g.wo; ++ox) {
          const int ix = ox * g.stride - g.pad + kx;
          dst[ox] = (ix >= 0 && ix < g.w) ? row[ix] : 0.0;
        }
        dst += g.wo;
      }
    }
  });
}

// Transpose of im2col; rows of one input channel scatter only into that
// channel, so channel-parallel accumulation stays deterministic.
void col2im_2d(const double* col, const Conv2dGeom& g, double* dx) {
  parallel_for(g.ci, [&](int64_t cb, int64_t ce) {
    for (int64_t ci = cb; ci < ce; ++ci) {
      double* xc = dx + ci * g.h * g.w;
      for (int ky = 0; ky < g.kh; ++ky) {
        for (int kx = 0; kx < g.kw; ++kx) {
          const int64_t r = (ci * g.kh + ky) * g.kw + kx;
          const double* src = col + r * g.cols();
          for (int oy = 0; oy < g.ho; ++oy) {
            const int iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= g.h) {
              src += g.wo;
              continue;
            }
            double* row = xc + static_cast<int64_t>(iy) * g.w;
            for (int ox = 0; ox < g.wo; ++ox) {
              const int ix = ox * g.stride - g.pad + kx;
              if (ix >= 0 && ix < g.w) row[ix] += src[ox];
            }
            src += g.wo;
          }
        }
      }
    }
  });
}

// ---- 3D ----

struct Conv3dGeom {
  int ci, x, y, z, k, stride, pad, xo, yo, zo;
  int64_t rows() const { return static_cast<int64_t>(ci) * k * k * k; }
  int64_t cols() const { return static_cast<int64_t>(xo) * yo * zo; }
};

void im2col_3d(const double* x, const Conv3dGeom& g, double* col) {
  parallel_for(g.rows(), [&](int64_t rb, int64_t re) {
    for (int64_t r = rb; r < re; ++r) {
      const int kz = static_cast<int>(r % g.k);
      const int ky = static_cast<int>((r / g.k) % g.k);
      const int kx = static_cast<int>((r / (g.k * g.k)) % g.k);
      const int ci = static_cast<int>(r / (static_cast<int64_t>(g.k) * g.k * g.k));
      const double* xc = x + static_cast<int64_t>(ci) * g.x * g.y * g.z;
      double* dst = col + r * g.cols();
      for (int ox = 0; ox < g.xo; ++ox) {
        const int ix = ox * g.stride - g.pad + kx;
        for (int oy = 0; oy < g.yo; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (ix < 0 || ix >= g.x || iy < 0 || iy >= g.y) {
            std::fill(dst, dst + g.zo, 0.0);
            dst += g.zo;
            continue;
          }
          const double* line = xc + (static_cast<int64_t>(ix) * g.y + iy) * g.z;
          if (g.stride == 1) {
            // z runs contiguously: copy the valid span, zero the edges.
            for (int oz = 0; oz < g.zo; ++oz) {
              const int iz = oz - g.pad + kz;
              dst[oz] = (iz >= 0 && iz < g.z) ? line[iz] : 0.0;
            }
          } else {
            for (int oz = 0; oz < g.zo; ++oz) {
              const int iz = oz * g.stride - g.pad + kz;
              dst[oz] = (iz >= 0 && iz < g.z) ? line[iz] : 0.0;
            }
          }
          dst += g.zo;
        }
      }
    }
  });
}

void col2im_3d(const double* col, const Conv3dGeom& g, double* dx) {
  parallel_for(g.ci, [&](int64_t cb, int64_t ce) {
    for (int64_t ci = cb; ci < ce; ++ci) {
      double* xc = dx + ci * g.x * g.y * g.z;
      for (int kx = 0; kx < g.k; ++kx)
        for (int ky = 0; ky < g.k; ++ky)
          for (int kz = 0; kz < g.k; ++kz) {
            const int64_t r = ((ci * g.k + kx) * g.k + ky) * g.k + kz;
            const double* src = col + r * g.cols();
            for (int ox = 0; ox < g.xo; ++ox) {
              const int ix = ox * g.stride - g.pad + kx;
              for (int oy = 0; oy < g.yo; ++oy) {
                const int iy = oy * g.stride - g.pad + ky;
                if (ix < 0 || ix >= g.x || iy < 0 || iy >= g.y) {
                  src += g.zo;
                  continue;
                }
                double* line = xc + (static_cast<int64_t>(ix) * g.y + iy) * g.z;
                for (int oz = 0; oz < g.zo; ++oz) {
                  const int iz = oz * g.stride - g.pad + kz;
                  if (iz >= 0 && iz < g.z) line[iz] += src[oz];
                }
                src += g.zo;
              }
            }
          }
    }
  });
}

int out_size(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  const auto& xs = x->value.shape();
  const auto& ws = w->value.shape();
  if (xs.size() != 4 || ws.size() != 4) throw ShapeMismatch("conv2d expects 4d x and w");
  if (xs[1] != ws[1]) throw ShapeMismatch("conv2d channel mismatch");
  const int batch = static_cast<int>(xs[0]);
  const int co = static_cast<int>(ws[0]);
  if (b->value.numel() != co) throw ShapeMismatch("conv2d bias size");
  Conv2dGeom g{static_cast<int>(xs[1]), static_cast<int>(xs[2]), static_cast<int>(xs[3]),
               static_cast<int>(ws[2]), static_cast<int>(ws[3]), stride, pad, 0, 0};
  g.ho = out_size(g.h, g.kh, stride, pad);
  g.wo = out_size(g.w, g.kw, stride, pad);
  if (g.ho <= 0 || g.wo <= 0) throw ShapeMismatch("conv2d output collapses");

  Tensor out({batch, co, g.ho, g.wo});
  const int64_t rows = g.rows(), cols = g.cols();
  auto& col = scratch_col();
  col.resize(static_cast<size_t>(rows * cols));
  for (int n = 0; n < batch; ++n) {
    const double* xb = x->value.data() + static_cast<int64_t>(n) * g.ci * g.h * g.w;
    double* yb = out.data() + static_cast<int64_t>(n) * co * cols;
    im2col_2d(xb, g, col.data());
    gemm(false, false, co, cols, rows, w->value.data(), col.data(), yb, false);
    for (int c = 0; c < co; ++c) {
      const double bias = b->value[c];
      double* row = yb + static_cast<int64_t>(c) * cols;
      for (int64_t i = 0; i < cols; ++i) row[i] += bias;
    }
  }

  return make_op(std::move(out), {x, w, b}, [x, w, b, g, batch, co](Node& self) {
    const int64_t rows = g.rows(), cols = g.cols();
    auto& col = scratch_col();
    col.resize(static_cast<size_t>(rows * cols));
    std::vector<double> dcol;
    if (x->requires_grad) dcol.resize(static_cast<size_t>(rows * cols));
    Tensor* dw = w->requires_grad ? &w->ensure_grad() : nullptr;
    Tensor* dxt = x->requires_grad ? &x->ensure_grad() : nullptr;
    Tensor* db = b->requires_grad ? &b->ensure_grad() : nullptr;
    for (int n = 0; n < batch; ++n) {
      const double* dyb = self.grad.data() + static_cast<int64_t>(n) * co * cols;
      if (dw) {
        const double* xb = x->value.data() + static_cast<int64_t>(n) * g.ci * g.h * g.w;
        im2col_2d(xb, g, col.data());
        gemm(false, true, co, rows, cols, dyb, col.data(), dw->data(), true);
      }
      if (db)
        for (int c = 0; c < co; ++c) {
          double s = 0.0;
          const double* row = dyb + static_cast<int64_t>(c) * cols;
          for (int64_t i = 0; i < cols; ++i) s += row[i];
          (*db)[c] += s;
        }
      if (dxt) {
        gemm(true, false, rows, cols, co, w->value.data(), dyb, dcol.data(), false);
        col2im_2d(dcol.data(), g, dxt->data() + static_cast<int64_t>(n) * g.ci * g.h * g.w);
      }
    }
  });
}

Var conv_transpose2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  const auto& xs = x->value.shape();
  const auto& ws = w->value.shape();
  if (xs.size() != 4 || ws.size() != 4)
    throw ShapeMismatch("conv_transpose2d expects 4d x and w");
  if (xs[1] != ws[0]) throw ShapeMismatch("conv_transpose2d channel mismatch");
  const int batch = static_cast<int>(xs[0]);
  const int ci = static_cast<int>(xs[1]);
  const int co = static_cast<int>(ws[1]);
  if (b->value.numel() != co) throw ShapeMismatch("conv_transpose2d bias size");
  const int kh = static_cast<int>(ws[2]), kw = static_cast<int>(ws[3]);
  const int hi = static_cast<int>(xs[2]), wi = static_cast<int>(xs[3]);
  const int ho = (hi - 1) * stride - 2 * pad + kh;
  const int wo = (wi - 1) * stride - 2 * pad + kw;
  // Dual geometry: a conv from the output back to the input.
  Conv2dGeom g{co, ho, wo, kh, kw, stride, pad, hi, wi};

  Tensor out({batch, co, ho, wo});
  const int64_t rows = g.rows();          // co * kh * kw
  const int64_t cols = g.cols();          // hi * wi
  auto& col = scratch_col();
  col.resize(static_cast<size_t>(rows * cols));
  for (int n = 0; n < batch; ++n) {
    const double* xb = x->value.data() + static_cast<int64_t>(n) * ci * cols;
    double* yb = out.data() + static_cast<int64_t>(n) * co * ho * wo;
    // col = W^T (ci x rows)^T * x (ci x cols), then scatter back to the image.
    gemm(true, false, rows, cols, ci, w->value.data(), xb, col.data(), false);
    std::fill(yb, yb + static_cast<int64_t>(co) * ho * wo, 0.0);
    col2im_2d(col.data(), g, yb);
    for (int c = 0; c < co; ++c) {
      const double bias = b->value[c];
      double* row = yb + static_cast<int64_t>(c) * ho * wo;
      for (int64_t i = 0; i < static_cast<int64_t>(ho) * wo; ++i) row[i] += bias;
    }
  }

  return make_op(std::move(out), {x, w, b}, [x, w, b, g, batch, ci, co](Node& self) {
    const int64_t rows = g.rows(), cols = g.cols();
    const int64_t opix = static_cast<int64_t>(g.h) * g.w;
    auto& col = scratch_col();
    col.resize(static_cast<size_t>(rows * cols));
    Tensor* dw = w->requires_grad ? &w->ensure_grad() : nullptr;
    Tensor* dxt = x->requires_grad ? &x->ensure_grad() : nullptr;
    Tensor* db = b->requires_grad ? &b->ensure_grad() : nullptr;
    for (int n = 0; n < batch; ++n) {
      const double* dyb = self.grad.data() + static_cast<int64_t>(n) * co * opix;
      im2col_2d(dyb, g, col.data());  // col of the output gradient
      if (dxt)
        gemm(false, false, ci, cols, rows, w->value.data(), col.data(),
             dxt->data() + static_cast<int64_t>(n) * ci * cols, true);
      if (dw) {
        const double* xb = x->value.data() + static_cast<int64_t>(n) * ci * cols;
        gemm(false, true, ci, rows, cols, xb, col.data(), dw->data(), true);
      }
      if (db)
        for (int c = 0; c < co; ++c) {
          double s = 0.0;
          const double* row = dyb + static_cast<int64_t>(c) * opix;
          for (int64_t i = 0; i < opix; ++i) s += row[i];
          (*db)[c] += s;
        }
    }
  });
}

Var conv3d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  const auto& xs = x->value.shape();
  const auto& ws = w->value.shape();
  if (xs.size() != 5 || ws.size() != 5) throw ShapeMismatch("conv3d expects 5d x and w");
  if (xs[1] != ws[1]) throw ShapeMismatch("conv3d channel mismatch");
  if (ws[2] != ws[3] || ws[2] != ws[4]) throw ShapeMismatch("conv3d kernel must be cubic");
  const int batch = static_cast<int>(xs[0]);
  const int co = static_cast<int>(ws[0]);
  if (b->value.numel() != co) throw ShapeMismatch("conv3d bias size");
  Conv3dGeom g{static_cast<int>(xs[1]), static_cast<int>(xs[2]), static_cast<int>(xs[3]),
               static_cast<int>(xs[4]), static_cast<int>(ws[2]), stride, pad, 0, 0, 0};
  g.xo = out_size(g.x, g.k, stride, pad);
  g.yo = out_size(g.y, g.k, stride, pad);
  g.zo = out_size(g.z, g.k, stride, pad);
  if (g.xo <= 0 || g.yo <= 0 || g.zo <= 0) throw ShapeMismatch("conv3d output collapses");

  Tensor out({batch, co, g.xo, g.yo, g.zo});
  const int64_t rows = g.rows(), cols = g.cols();
  const int64_t ipix = static_cast<int64_t>(g.x) * g.y * g.z;
  auto& col = scratch_col();
  col.resize(static_cast<size_t>(rows * cols));
  for (int n = 0; n < batch; ++n) {
    const double* xb = x->value.data() + static_cast<int64_t>(n) * g.ci * ipix;
    double* yb = out.data() + static_cast<int64_t>(n) * co * cols;
    im2col_3d(xb, g, col.data());
    gemm(false, false, co, cols, rows, w->value.data(), col.data(), yb, false);
    for (int c = 0; c < co; ++c) {
      const double bias = b->value[c];
      double* row = yb + static_cast<int64_t>(c) * cols;
      for (int64_t i = 0; i < cols; ++i) row[i] += bias;
    }
  }

  return make_op(std::move(out), {x, w, b}, [x, w, b, g, batch, co](Node& self) {
    const int64_t rows = g.rows(), cols = g.cols();
    const int64_t ipix = static_cast<int64_t>(g.x) * g.y * g.z;
    auto& col = scratch_col();
    col.resize(static_cast<size_t>(rows * cols));
    std::vector<double> dcol;
    if (x->requires_grad) dcol.resize(static_cast<size_t>(rows * cols));
    Tensor* dw = w->requires_grad ? &w->ensure_grad() : nullptr;
    Tensor* dxt = x->requires_grad ? &x->ensure_grad() : nullptr;
    Tensor* db = b->requires_grad ? &b->ensure_grad() : nullptr;
    for (int n = 0; n < batch; ++n) {
      const double* dyb = self.grad.data() + static_cast<int64_t>(n) * co * cols;
      if (dw) {
        const double* xb = x->value.data() + static_cast<int64_t>(n) * g.ci * ipix;
        im2col_3d(xb, g, col.data());
        gemm(false, true, co, rows, cols, dyb, col.data(), dw->data(), true);
      }
      if (db)
        for (int c = 0; c < co; ++c) {
          double s = 0.0;
          const double* row = dyb + static_cast<int64_t>(c) * cols;
          for (int64_t i = 0; i < cols; ++i) s += row[i];
          (*db)[c] += s;
        }
      if (dxt) {
        gemm(true, false, rows, cols, co, w->value.data(), dyb, dcol.data(), false);
        col2im_3d(dcol.data(), g, dxt->data() + static_cast<int64_t>(n) * g.ci * ipix);
      }
    }
  });
}

Var upsample_nearest2x_3d(const Var& x) {
  const auto& s = x->value.shape();
  if (s.size() != 5) throw ShapeMismatch("upsample_nearest2x_3d expects 5d input");
  const int64_t bc = s[0] * s[1];
  const int64_t X = s[2], Y = s[3], Z = s[4];
  Tensor out({s[0], s[1], 2 * X, 2 * Y, 2 * Z});
  const double* in = x->value.data();
  double* o = out.data();
  parallel_for(bc, [&](int64_t cb, int64_t ce) {
    for (int64_t c = cb; c < ce; ++c) {
      const double* xc = in + c * X * Y * Z;
      double* oc = o + c * 8 * X * Y * Z;
      for (int64_t ix = 0; ix < 2 * X; ++ix)
        for (int64_t iy = 0; iy < 2 * Y; ++iy) {
          const double* line = xc + ((ix / 2) * Y + iy / 2) * Z;
          double* dst = oc + (ix * 2 * Y + iy) * 2 * Z;
          for (int64_t iz = 0; iz < Z; ++iz) {
            dst[2 * iz] = line[iz];
            dst[2 * iz + 1] = line[iz];
          }
        }
    }
  });
  return make_op(std::move(out), {x}, [x, bc, X, Y, Z](Node& self) {
    if (!x->requires_grad) return;
    Tensor& g = x->ensure_grad();
    const double* dy = self.grad.data();
    double* dx = g.data();
    parallel_for(bc, [&](int64_t cb, int64_t ce) {
      for (int64_t c = cb; c < ce; ++c) {
        const double* dyc = dy + c * 8 * X * Y * Z;
        double* dxc = dx + c * X * Y * Z;
        for (int64_t ix = 0; ix < 2 * X; ++ix)
          for (int64_t iy = 0; iy < 2 * Y; ++iy) {
            const double* src = dyc + (ix * 2 * Y + iy) * 2 * Z;
            double* line = dxc + ((ix / 2) * Y + iy / 2) * Z;
            for (int64_t iz = 0; iz < Z; ++iz)
              line[iz] += src[2 * iz] + src[2 * iz + 1];
          }
      }
    });
  });
}

}  // namespace sp3d::ad
