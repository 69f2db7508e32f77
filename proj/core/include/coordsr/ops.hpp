#pragma once

#include "coordsr/resample.hpp"
#include "coordsr/tape.hpp"

/// Differentiable ops recorded on a Tape. Shape mismatches throw
/// ConfigError.
namespace coordsr::ops {

/// Cross-correlation with zero "same" padding. input [N,Cin,H,W],
/// kernel [Cout,Cin,k,k] with k odd, bias [Cout] -> [N,Cout,H,W].
Var conv2d(Var input, Var kernel, Var bias);

/// Affine map along the last axis: input [..., in], weight [out, in],
/// bias [out] -> [..., out].
Var linear(Var input, Var weight, Var bias);

/// max(0, x); the gradient at exactly 0 is 0.
Var relu(Var x);

Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, float s);
/// a + s * b
Var add_scaled(Var a, Var b, float s);
/// Scalar sum of all elements.
Var sum(Var x);

/// mean |pred - target|; the subgradient at 0 is 0.
Var mean_abs_error(Var pred, const Tensor& target);
/// mean (pred - target)^2
Var mean_squared_error(Var pred, const Tensor& target);

/// [N,C,H,W] -> [N*H*W, C]
Var to_rows(Var nchw);
/// [N*H*W, C] -> [N,C,H,W]
Var from_rows(Var rows, int n, int h, int w);

/// [N, C*r*r, H, W] -> [N, C, H*r, W*r] with
/// out[n, c, h*r+i, w*r+j] = in[n, c*r*r + i*r + j, h, w].
Var pixel_shuffle(Var x, int r);

/// Gathers the four neighbor codes of every query in `geom` from a
/// feature grid [N,C,l,w] into rows [N*Q*4, C] (query-major, neighbor
/// minor). With `with_offsets`, each row gets the (dx,dy) cell offset of
/// the query from that neighbor appended -> [N*Q*4, C+2].
Var gather_codes(Var features, const EnsembleGeometry& geom, bool with_offsets);

/// Blends per-neighbor decoder outputs [N*Q*4, 1] with the ensemble
/// weights -> [N,1,out_rows,out_cols].
Var blend_neighbors(Var values, const EnsembleGeometry& geom, int batch);

/// Ensemble-weighted interpolation of per-cell values [N,1,l,w] onto
/// the output raster -> [N,1,out_rows,out_cols].
Var ensemble_upsample(Var cells, const EnsembleGeometry& geom);

}  // namespace coordsr::ops
