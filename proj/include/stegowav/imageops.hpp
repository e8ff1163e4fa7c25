#pragma once

// Colour conversion, pixel shuffle with luma buffering, bilinear resizing and
// replica-grid packing.

#include <Eigen/Dense>

#include <array>
#include <string>
#include <vector>

#include "stegowav/autodiff.hpp"
#include "stegowav/errors.hpp"

namespace stegowav {

/// H×W RGB image with channel values in [0, 1].
template <typename Scalar>
class BasicRgbImage {
 public:
  BasicRgbImage() = default;
  BasicRgbImage(Index height, Index width) {
    for (auto& c : channels_) c = RowMatrix<Scalar>::Zero(height, width);
  }
  /// Channels are clamped to [0, 1] on ingest.
  BasicRgbImage(RowMatrix<Scalar> r, RowMatrix<Scalar> g, RowMatrix<Scalar> b)
      : channels_{std::move(r), std::move(g), std::move(b)} {
    if (channels_[1].rows() != channels_[0].rows() || channels_[2].rows() != channels_[0].rows() ||
        channels_[1].cols() != channels_[0].cols() || channels_[2].cols() != channels_[0].cols()) {
      throw ConfigError("rgb image channels differ in shape");
    }
    clamp();
  }

  static BasicRgbImage filled(Index height, Index width, Scalar r, Scalar g, Scalar b) {
    return BasicRgbImage(RowMatrix<Scalar>::Constant(height, width, r), RowMatrix<Scalar>::Constant(height, width, g),
                         RowMatrix<Scalar>::Constant(height, width, b));
  }

  /// From a [3, H, W] tensor, clamping to [0, 1].
  static BasicRgbImage from_tensor(const BasicTensor<Scalar>& t) {
    if (t.rank() != 3 || t.depth() != 3) throw ConfigError("rgb tensor must be [3,H,W], got " + shape_string(t.shape()));
    return BasicRgbImage(t.plane(0), t.plane(1), t.plane(2));
  }

  BasicTensor<Scalar> to_tensor() const {
    BasicTensor<Scalar> t = BasicTensor<Scalar>::zeros({3, height(), width()});
    for (Index c = 0; c < 3; ++c) t.plane(c) = channels_[c];
    return t;
  }

  Index height() const { return channels_[0].rows(); }
  Index width() const { return channels_[0].cols(); }

  const RowMatrix<Scalar>& channel(Index c) const { return channels_[c]; }
  RowMatrix<Scalar>& channel(Index c) { return channels_[c]; }

  Eigen::Matrix<Scalar, 3, 1> pixel(Index y, Index x) const {
    return {channels_[0](y, x), channels_[1](y, x), channels_[2](y, x)};
  }
  void set_pixel(Index y, Index x, const Eigen::Matrix<Scalar, 3, 1>& p) {
    for (Index c = 0; c < 3; ++c) channels_[c](y, x) = p[c];
  }

  void clamp() {
    for (auto& c : channels_) c = c.cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
  }

 private:
  std::array<RowMatrix<Scalar>, 3> channels_;
};

using RgbImage = BasicRgbImage<double>;
using Plane = RowMatrix<double>;
using Pixel = Eigen::Vector3d;

// ---------------------------------------------------------------------------
// Full-range (JPEG) YCbCr

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> ycbcr_matrix() {
  Eigen::Matrix<Scalar, 3, 3> m;
  m << Scalar(0.299), Scalar(0.587), Scalar(0.114),
       Scalar(-0.168736), Scalar(-0.331264), Scalar(0.5),
       Scalar(0.5), Scalar(-0.418688), Scalar(-0.081312);
  return m;
}

// The matrix rows are evaluated in difference form (rows sum to 1, 0, 0), so
// gray pixels map to (v, 0.5, 0.5) and back without rounding.
template <typename Scalar>
Scalar luma(Scalar r, Scalar g, Scalar b) {
  return g + Scalar(0.299) * (r - g) + Scalar(0.114) * (b - g);
}

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> rgb_to_ycbcr(const Eigen::Matrix<Scalar, 3, 1>& rgb) {
  const Scalar r = rgb[0], g = rgb[1], b = rgb[2];
  return {luma(r, g, b), Scalar(0.5) * (b - g) + Scalar(0.168736) * (g - r) + Scalar(0.5),
          Scalar(0.5) * (r - g) + Scalar(0.081312) * (g - b) + Scalar(0.5)};
}

/// Exact inverse of rgb_to_ycbcr, clamped to [0, 1].
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> ycbcr_to_rgb(const Eigen::Matrix<Scalar, 3, 1>& ycc) {
  static const Eigen::Matrix<Scalar, 3, 3> inv = ycbcr_matrix<Scalar>().inverse();
  const Scalar cb = ycc[1] - Scalar(0.5), cr = ycc[2] - Scalar(0.5);
  const Eigen::Matrix<Scalar, 3, 1> rgb = Eigen::Matrix<Scalar, 3, 1>::Constant(ycc[0]) + inv.col(1) * cb + inv.col(2) * cr;
  return rgb.cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
}

// ---------------------------------------------------------------------------
// Pixel shuffle. Each source pixel becomes the 2×2 cell
//   [ R  G ]
//   [ B  Y ]
// with Y the luma (LumaMode::buffer) or 0 (LumaMode::zero_pad).

enum class LumaMode { buffer, zero_pad };

template <typename Scalar>
RowMatrix<Scalar> shuffle_with_luma(const BasicRgbImage<Scalar>& s, LumaMode mode = LumaMode::buffer) {
  const Index H = s.height(), W = s.width();
  RowMatrix<Scalar> p(2 * H, 2 * W);
  for (Index y = 0; y < H; ++y) {
    for (Index x = 0; x < W; ++x) {
      const Scalar r = s.channel(0)(y, x), g = s.channel(1)(y, x), b = s.channel(2)(y, x);
      p(2 * y, 2 * x) = r;
      p(2 * y, 2 * x + 1) = g;
      p(2 * y + 1, 2 * x) = b;
      p(2 * y + 1, 2 * x + 1) = mode == LumaMode::buffer ? luma(r, g, b) : Scalar(0);
    }
  }
  return p;
}

/// Per cell: luma recomputed from RGB is averaged with the received luma and
/// the pixel converted back through YCbCr. Zero-pad mode ignores the slot.
template <typename Scalar>
BasicRgbImage<Scalar> unshuffle_with_luma(const RowMatrix<Scalar>& p, LumaMode mode = LumaMode::buffer) {
  if (p.rows() % 2 || p.cols() % 2) {
    throw ConfigError("unshuffle needs even plane extents, got " + std::to_string(p.rows()) + "x" +
                      std::to_string(p.cols()));
  }
  const Index H = p.rows() / 2, W = p.cols() / 2;
  BasicRgbImage<Scalar> out(H, W);
  for (Index y = 0; y < H; ++y) {
    for (Index x = 0; x < W; ++x) {
      const Eigen::Matrix<Scalar, 3, 1> rgb(p(2 * y, 2 * x), p(2 * y, 2 * x + 1), p(2 * y + 1, 2 * x));
      if (mode == LumaMode::zero_pad) {
        out.set_pixel(y, x, rgb.cwiseMax(Scalar(0)).cwiseMin(Scalar(1)));
        continue;
      }
      Eigen::Matrix<Scalar, 3, 1> ycc = rgb_to_ycbcr(rgb);
      ycc[0] = Scalar(0.5) * (ycc[0] + p(2 * y + 1, 2 * x + 1));
      out.set_pixel(y, x, ycbcr_to_rgb(ycc));
    }
  }
  return out;
}

/// Differentiable unshuffle: [1, 2H, 2W] → [3, H, W], unclamped.
/// Replacing Y by (Y_received + Y_rgb)/2 and inverting YCbCr shifts every
/// channel by d = (Y_received − Y_rgb)/2.
template <typename Scalar>
BasicVar<Scalar> unshuffle_op(BasicVar<Scalar> plane, LumaMode mode = LumaMode::buffer) {
  detail::require_rank("unshuffle_op", plane, 3);
  const Index PH = plane.shape()[1], PW = plane.shape()[2];
  if (plane.shape()[0] != 1 || PH % 2 || PW % 2) {
    throw ConfigError("unshuffle_op needs a [1, even, even] plane, got " + shape_string(plane.shape()));
  }
  const Index H = PH / 2, W = PW / 2;
  const Scalar kr = Scalar(0.299), kg = Scalar(0.587), kb = Scalar(0.114);
  const auto p = plane.value().plane(0);
  BasicTensor<Scalar> out = BasicTensor<Scalar>::zeros({3, H, W});
  for (Index y = 0; y < H; ++y) {
    for (Index x = 0; x < W; ++x) {
      const Scalar r = p(2 * y, 2 * x), g = p(2 * y, 2 * x + 1), b = p(2 * y + 1, 2 * x);
      const Scalar d = mode == LumaMode::buffer ? Scalar(0.5) * (p(2 * y + 1, 2 * x + 1) - luma(r, g, b)) : Scalar(0);
      out.plane(0)(y, x) = r + d;
      out.plane(1)(y, x) = g + d;
      out.plane(2)(y, x) = b + d;
    }
  }
  return plane.tape->record(std::move(out), {plane}, [=](auto& t, const auto& gr) {
    typename BasicTensor<Scalar>::Array gp = BasicTensor<Scalar>::Array::Zero(PH * PW);
    const Index n = H * W;
    for (Index y = 0; y < H; ++y) {
      for (Index x = 0; x < W; ++x) {
        const Index i = y * W + x;
        const Scalar g0 = gr[i], g1 = gr[n + i], g2 = gr[2 * n + i];
        Scalar gd = 0;
        if (mode == LumaMode::buffer) gd = g0 + g1 + g2;
        gp[(2 * y) * PW + 2 * x] = g0 - Scalar(0.5) * kr * gd;
        gp[(2 * y) * PW + 2 * x + 1] = g1 - Scalar(0.5) * kg * gd;
        gp[(2 * y + 1) * PW + 2 * x] = g2 - Scalar(0.5) * kb * gd;
        gp[(2 * y + 1) * PW + 2 * x + 1] = Scalar(0.5) * gd;
      }
    }
    t.accumulate(plane, gp);
  });
}

// ---------------------------------------------------------------------------
// Bilinear resize with corner-aligned sampling: output index i maps to source
// coordinate i·(n−1)/(n'−1).

/// n_out × n_in interpolation matrix along one axis.
template <typename Scalar>
RowMatrix<Scalar> bilinear_weights(Index n_in, Index n_out) {
  if (n_in <= 0 || n_out <= 0) throw ConfigError("bilinear resize needs positive extents");
  RowMatrix<Scalar> m = RowMatrix<Scalar>::Zero(n_out, n_in);
  for (Index i = 0; i < n_out; ++i) {
    if (n_in == 1 || n_out == 1) {
      m(i, 0) = 1;
      continue;
    }
    const Scalar s = Scalar(i) * Scalar(n_in - 1) / Scalar(n_out - 1);
    Index i0 = static_cast<Index>(std::floor(s));
    if (i0 >= n_in - 1) i0 = n_in - 2;
    const Scalar f = s - Scalar(i0);
    m(i, i0) += Scalar(1) - f;
    m(i, i0 + 1) += f;
  }
  return m;
}

template <typename Scalar>
RowMatrix<Scalar> bilinear_resize(const RowMatrix<Scalar>& p, Index height, Index width) {
  if (height <= 0 || width <= 0) throw ConfigError("bilinear resize target must be positive");
  return bilinear_weights<Scalar>(p.rows(), height) * p * bilinear_weights<Scalar>(p.cols(), width).transpose();
}

/// Differentiable resize of every channel of a [C, H, W] tensor.
template <typename Scalar>
BasicVar<Scalar> bilinear_resize_op(BasicVar<Scalar> x, Index height, Index width) {
  detail::require_rank("bilinear_resize_op", x, 3);
  const Index C = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
  if (height == H && width == W) return x;
  const RowMatrix<Scalar> ry = bilinear_weights<Scalar>(H, height);
  const RowMatrix<Scalar> rx = bilinear_weights<Scalar>(W, width);
  BasicTensor<Scalar> out = BasicTensor<Scalar>::zeros({C, height, width});
  for (Index c = 0; c < C; ++c) out.plane(c).noalias() = ry * x.value().plane(c) * rx.transpose();
  return x.tape->record(std::move(out), {x}, [=](auto& t, const auto& g) {
    typename BasicTensor<Scalar>::Array gx(C * H * W);
    for (Index c = 0; c < C; ++c) {
      const Eigen::Map<const RowMatrix<Scalar>> gc(g.data() + c * height * width, height, width);
      Eigen::Map<RowMatrix<Scalar>>(gx.data() + c * H * W, H, W).noalias() = ry.transpose() * gc * rx;
    }
    t.accumulate(x, gx);
  });
}

// ---------------------------------------------------------------------------
// Replica grids. Replica (i, j) occupies frequency rows [i·cell_h, (i+1)·cell_h)
// and frames [j·cell_w, (j+1)·cell_w); replicas are numbered row-major, so
// replica 0 sits at the low-frequency edge.

struct ReplicaGrid {
  Index rows = 1;
  Index cols = 1;
  Index cell_h = 1;
  Index cell_w = 1;

  Index count() const { return rows * cols; }
  Index height() const { return rows * cell_h; }
  Index width() const { return cols * cell_w; }

  friend bool operator==(const ReplicaGrid&, const ReplicaGrid&) = default;
};

template <typename Scalar>
RowMatrix<Scalar> pack_grid(const std::vector<RowMatrix<Scalar>>& replicas, const ReplicaGrid& g) {
  if (static_cast<Index>(replicas.size()) != g.count()) {
    throw ConfigError("pack_grid: " + std::to_string(replicas.size()) + " replicas for a " +
                      std::to_string(g.rows) + "x" + std::to_string(g.cols) + " grid");
  }
  RowMatrix<Scalar> out(g.height(), g.width());
  for (Index i = 0; i < g.rows; ++i) {
    for (Index j = 0; j < g.cols; ++j) {
      const auto& r = replicas[i * g.cols + j];
      if (r.rows() != g.cell_h || r.cols() != g.cell_w) {
        throw ConfigError("pack_grid: replica " + std::to_string(i * g.cols + j) + " is " +
                          std::to_string(r.rows()) + "x" + std::to_string(r.cols()) + ", cell is " +
                          std::to_string(g.cell_h) + "x" + std::to_string(g.cell_w));
      }
      out.block(i * g.cell_h, j * g.cell_w, g.cell_h, g.cell_w) = r;
    }
  }
  return out;
}

template <typename Scalar>
std::vector<RowMatrix<Scalar>> unpack_grid(const RowMatrix<Scalar>& container, const ReplicaGrid& g) {
  if (container.rows() != g.height() || container.cols() != g.width()) {
    throw ConfigError("unpack_grid: container " + std::to_string(container.rows()) + "x" +
                      std::to_string(container.cols()) + " does not match grid " + std::to_string(g.height()) +
                      "x" + std::to_string(g.width()));
  }
  std::vector<RowMatrix<Scalar>> out;
  for (Index i = 0; i < g.rows; ++i)
    for (Index j = 0; j < g.cols; ++j) out.emplace_back(container.block(i * g.cell_h, j * g.cell_w, g.cell_h, g.cell_w));
  return out;
}

/// Differentiable pack of [1, cell_h, cell_w] replicas into [1, H, W].
template <typename Scalar>
BasicVar<Scalar> pack_grid_op(const std::vector<BasicVar<Scalar>>& replicas, const ReplicaGrid& g) {
  if (static_cast<Index>(replicas.size()) != g.count()) {
    throw ConfigError("pack_grid: " + std::to_string(replicas.size()) + " replicas for a " +
                      std::to_string(g.rows) + "x" + std::to_string(g.cols) + " grid");
  }
  const Shape cell{1, g.cell_h, g.cell_w};
  std::vector<BasicVar<Scalar>> bands;
  for (Index i = 0; i < g.rows; ++i) {
    std::vector<BasicVar<Scalar>> row;
    for (Index j = 0; j < g.cols; ++j) {
      const auto& r = replicas[i * g.cols + j];
      if (r.shape() != cell) {
        throw ConfigError("pack_grid: replica " + shape_string(r.shape()) + " does not match cell " + shape_string(cell));
      }
      row.push_back(r);
    }
    bands.push_back(row.size() == 1 ? row[0] : concat(row, 2));
  }
  return bands.size() == 1 ? bands[0] : concat(bands, 1);
}

/// Differentiable unpack of a [1, H, W] container into row-major replicas.
template <typename Scalar>
std::vector<BasicVar<Scalar>> unpack_grid_op(BasicVar<Scalar> container, const ReplicaGrid& g) {
  if (container.shape() != Shape{1, g.height(), g.width()}) {
    throw ConfigError("unpack_grid: container " + shape_string(container.shape()) + " does not match grid " +
                      std::to_string(g.height()) + "x" + std::to_string(g.width()));
  }
  std::vector<BasicVar<Scalar>> out;
  for (Index i = 0; i < g.rows; ++i) {
    BasicVar<Scalar> band = g.rows == 1 ? container : slice(container, 1, i * g.cell_h, (i + 1) * g.cell_h);
    for (Index j = 0; j < g.cols; ++j) {
      out.push_back(g.cols == 1 ? band : slice(band, 2, j * g.cell_w, (j + 1) * g.cell_w));
    }
  }
  return out;
}

}  // namespace stegowav
