#include "cura/model_config.hpp"

#include <cmath>

#include "cura/core.hpp"

namespace cura {

void ModelConfig::validate() const {
  if (layers < 1 || hidden < 1 || heads < 1 || ffn < 1) throw ValidationError("encoder dimensions must be positive");
  if (hidden % heads != 0) throw ValidationError("hidden width must be divisible by the number of heads");
  if (max_len < 16) throw ValidationError("max_len must leave room for the metadata prefix (>= 16)");
  if (head_width < 0) throw ValidationError("head_width must be non-negative");
  if (!(init_std > 0) || !std::isfinite(init_std)) throw ValidationError("init_std must be positive");
}

void Hyperparams::validate() const {
  if (epochs < 1 || batch_size < 1) throw ValidationError("epochs and batch size must be positive");
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw ValidationError("learning rate must be positive");
  if (!(finetune_learning_rate >= 0) || !std::isfinite(finetune_learning_rate))
    throw ValidationError("finetune learning rate must be non-negative");
  if (!(warmup_fraction >= 0 && warmup_fraction <= 1)) throw ValidationError("warmup_fraction must lie in [0, 1]");
  if (!(downvote_weight > 0)) throw ValidationError("downvote weight must be positive");
}

}  // namespace cura
