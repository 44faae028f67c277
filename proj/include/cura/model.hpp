#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cura/dataset.hpp"
#include "cura/model_config.hpp"
#include "cura/serialize.hpp"
#include "cura/transformer.hpp"
#include "cura/vocabulary.hpp"

namespace cura {

struct Prediction {
  double p = 0.5;  ///< probability of an upvote
  Direction decision = Direction::Up;
  bool low_confidence = false;  ///< target user is not in the vocabulary
};

/// Upvote iff p >= threshold.
inline Direction decide(double p, double threshold) { return p >= threshold ? Direction::Up : Direction::Down; }

enum class StepOutcome { Applied, SkippedNonFinite };

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Encoder, projector and vocabulary: everything needed to predict and to
/// take further finetuning steps.
class CurationModel {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  CurationModel(ModelConfig config, Hyperparams hyper, Vocabulary vocab, EncoderParams<float> params,
                std::uint64_t step = 0);
  /// Fresh model with randomly initialised parameters.
  static CurationModel initialise(ModelConfig config, Hyperparams hyper, Vocabulary vocab, std::uint64_t seed);

  const ModelConfig& config() const { return encoder_.config(); }
  const Hyperparams& hyperparams() const { return hyper_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  const EncoderParams<float>& params() const { return encoder_.params(); }
  EncoderParams<float>& mutable_params() { return encoder_.params(); }
  const Encoder<float>& encoder() const { return encoder_; }
  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t s) { step_ = s; }

  SerializedExample serialize(const std::string& user, const PostRecord& post) const {
    return serialize_input(user, post, vocab_, config().max_len);
  }

  double probability(const SerializedExample& example) const;
  double probability(const std::string& user, const PostRecord& post) const;
  Prediction predict(const std::string& user, const PostRecord& post, double threshold = 0.5) const;
  /// Many curators, one post.
  std::vector<Prediction> predict_many(const std::vector<std::string>& users, const PostRecord& post,
                                       double threshold = 0.5) const;

  /// Weighted BCE of one example.
  double loss(const SerializedExample& example, Direction label, double weight) const;

  /// One optimisation step on a single example. Adam mode takes the first step
  /// of a freshly initialised Adam optimiser, i.e. lr * g / (|g| + eps) per
  /// parameter; Sgd mode takes lr * g. The vocabulary is never touched. A
  /// non-finite gradient leaves the model unchanged.
  StepOutcome finetune_step(const SerializedExample& example, Direction label, double weight, double lr);

  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static CurationModel load(std::istream& in);
  static CurationModel load(const std::filesystem::path& path);
  /// FNV-1a over the serialised bytes, as 16 hex digits.
  std::string fingerprint() const;

 private:
  Hyperparams hyper_;
  Vocabulary vocab_;
  Encoder<float> encoder_;
  std::uint64_t step_ = 0;
};

struct TrainOptions {
  std::size_t base_vocab_size = 30000;
  /// Loss-weight statistics; defaults to counts over the training votes.
  std::optional<VoteStats> stats;
  /// Monitors the weighted loss on this many training examples before and after.
  std::size_t monitor_examples = 2000;
  std::function<void(int epoch, double mean_loss)> on_epoch;
};

struct TrainReport {
  double initial_loss = 0;
  double final_loss = 0;
  std::vector<double> epoch_loss;
  std::size_t examples = 0;
  std::size_t skipped_orphans = 0;
};

/// Users that get their own token: every voter plus every post author, sorted.
std::vector<std::string> vocabulary_users(const VoteCollection& votes, const PostIndex& posts);
/// Subword list built from the post fields that end up in model inputs.
WordPiece build_base_vocabulary(const PostIndex& posts, std::size_t max_size);

/// Trains with Adam on the weighted binary cross-entropy. Orphan votes count
/// toward the weighting statistics but produce no training example.
CurationModel train(const VoteCollection& train_votes, const PostIndex& posts, const ModelConfig& config,
                    const Hyperparams& hyper, const TrainOptions& options = {}, TrainReport* report = nullptr);

/// Predicts the majority direction among observed votes; ties and the empty
/// case go to UP with p = 0.5.
Prediction majority_baseline(const std::vector<Direction>& observed);

}  // namespace cura
