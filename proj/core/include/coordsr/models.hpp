#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coordsr/image.hpp"
#include "coordsr/resample.hpp"
#include "coordsr/tape.hpp"

namespace coordsr {

enum class ModelKind { coord, conv };

ModelKind parse_model_kind(std::string_view s);
std::string to_string(ModelKind k);

struct ModelConfig {
  ModelKind kind = ModelKind::coord;
  int d = 64;          // feature channels
  int blocks = 8;      // residual blocks in the encoder
  int mlp_layers = 5;  // affine layers in the coordinate decoder
  int hidden = 256;
  bool liif_mode = false;  // append (dx,dy) neighbor offsets to each code
  int scale = 2;           // conv decoder only; fixed at construction

  /// ~1.4M-parameter encoder + decoder (16 residual blocks).
  static ModelConfig full();
  /// d=8, 2 blocks, 3-layer MLP with 16 hidden units.
  static ModelConfig tiny();

  /// Throws ConfigError listing every invalid field.
  void validate() const;
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// head 3x3 conv (10d), R blocks of two 3x3 convs (18d^2 + 2d each),
/// tail 3x3 conv (9d^2 + d).
std::size_t encoder_param_count(int d, int blocks);
/// (in*h + h) + (layers-2)*(h*h + h) + (h + 1)
std::size_t mlp_param_count(int in, int hidden, int layers);
/// up conv d -> d*s^2 and output conv d -> 1, both 3x3.
std::size_t conv_decoder_param_count(int d, int scale);

/// Encoder f_psi plus either the coordinate decoder g_theta or the
/// fixed-scale sub-pixel conv decoder.
class Model {
 public:
  /// Kaiming-uniform (fan-in) weights, zero biases; the second conv of
  /// every residual block is scaled by 0.1.
  Model(ModelConfig cfg, std::uint64_t seed);
  Model(ModelConfig cfg, std::vector<NamedTensor> params);

  const ModelConfig& config() const { return cfg_; }
  std::vector<NamedTensor>& params() { return params_; }
  const std::vector<NamedTensor>& params() const { return params_; }

  std::size_t encoder_tensor_count() const { return encoder_tensors_; }
  std::size_t param_count() const;
  std::size_t encoder_param_count() const;
  std::size_t decoder_param_count() const;

  /// Records every parameter as a tape leaf; trainable leaves track grads.
  std::vector<Var> bind(Tape& tape, bool trainable) const;

  /// x [N,1,l,w] -> feature grid [N,d,l,w].
  Var encode(Tape& tape, std::span<const Var> params, Var x) const;

  /// Differentiable x_lr [N,1,h,w] -> image [N,1,out_rows,out_cols].
  /// Conv models require out = scale * in (UsageError otherwise).
  Var forward(Tape& tape, std::span<const Var> params, Var x, int out_rows, int out_cols) const;

  /// Coordinate decoder on a recorded feature grid.
  Var decode(Tape& tape, std::span<const Var> params, Var features, const EnsembleGeometry& geom) const;

  /// Evaluates the decoder MLP on rows of codes [M, in] -> [M, 1].
  Var mlp(Tape& tape, std::span<const Var> params, Var rows) const;

  /// Inference: encode + decode, clamped to [0,1].
  ImageGrid infer(const ImageGrid& input, int out_rows, int out_cols) const;

 private:
  void init(std::uint64_t seed);
  std::span<const Var> decoder_params(std::span<const Var> params) const {
    return params.subspan(encoder_tensors_);
  }

  ModelConfig cfg_;
  std::vector<NamedTensor> params_;
  std::size_t encoder_tensors_ = 0;
};

/// Feature grid C for one image: [1, d, l, w]. Throws DomainError below 8x8,
/// NumericError naming the encoder layer on non-finite activations.
Tensor encode(const Model& model, const ImageGrid& x_lr);

/// g(c*) = sum_k w_k g(c_k) at a single query. DomainError outside [0,1]^2.
double decode_point(const Model& model, const Tensor& features, ContinuousCoord query);

/// decode_point at every half-pixel center of an out_rows x out_cols
/// raster (unclamped).
ImageGrid decode_image(const Model& model, const Tensor& features, int out_rows, int out_cols);

/// Fixed-scale sub-pixel decoder; UsageError unless scale == config().scale.
ImageGrid conv_decode(const Model& model, const Tensor& features, int scale);

}  // namespace coordsr
