#pragma once

#include <cstdint>
#include <string>

namespace cura {

enum class InitMode { PretrainedSmall, Random };
enum class FinetuneOptimizer { Adam, Sgd };
enum class FinetuneWeighting { Recomputed, Unit };

/// Encoder shape. The defaults mirror a BERT-mini sized encoder.
struct ModelConfig {
  int layers = 4;
  int hidden = 256;
  int heads = 4;
  int ffn = 1024;
  int max_len = 512;
  int head_width = 0;  ///< 0: linear projector on the user token; >0: tanh pooler of this width first
  InitMode init = InitMode::Random;
  double init_std = 0.02;  ///< std of the normal init for weight matrices and embeddings
  std::string pretrained_path;  ///< checkpoint whose encoder seeds training when init = PretrainedSmall

  void validate() const;
};

struct Hyperparams {
  int epochs = 10;
  int batch_size = 64;
  double learning_rate = 3e-5;
  /// Fraction of steps spent on linear warmup; the rate then decays linearly to zero. 0 keeps it constant.
  double warmup_fraction = 0;
  double finetune_learning_rate = 3.6e-5;
  double downvote_weight = 1.5;
  std::uint64_t seed = 42;
  FinetuneOptimizer finetune_optimizer = FinetuneOptimizer::Adam;
  FinetuneWeighting finetune_weighting = FinetuneWeighting::Recomputed;

  void validate() const;
};

}  // namespace cura
