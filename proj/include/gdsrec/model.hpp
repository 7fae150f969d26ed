#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gdsrec/autodiff.hpp"
#include "gdsrec/dataset.hpp"
#include "gdsrec/graph.hpp"

namespace gdsrec {

enum class AttentionMode { kSoftmax, kAverage, kMax };
enum class Activation { kRelu, kSigmoid };

std::string to_string(AttentionMode mode);
AttentionMode parse_attention_mode(const std::string& s);
std::string to_string(Activation a);
Activation parse_activation(const std::string& s);

struct ModelConfig {
  int dim = 64;                       // D
  int reservation = 10;               // K, interaction neighbors kept per node
  int social_reservation = 10;        // social neighbors kept per user (0 keeps all)
  int delta = 1;                      // co-rating threshold for relationship coefficients
  double alpha = 1.0;                 // weight on the average-rating term
  double social_weight = 0.5;         // share of the social term in the fused score
  AttentionMode attention = AttentionMode::kSoftmax;
  Activation activation = Activation::kRelu;
  bool use_social = true;
  bool use_relationship_coeff = true;
  bool use_rating_difference = true;
  int attention_hidden = 0;           // 0 means dim
  int fusion_hidden = 0;              // 0 means dim
  double embedding_init = 0.1;        // embeddings ~ U[-a, a]
  double l2 = 0.0;

  int attention_width() const { return attention_hidden > 0 ? attention_hidden : dim; }
  int fusion_width() const { return fusion_hidden > 0 ? fusion_hidden : dim; }
  EdgeLabel edge_label() const { return use_rating_difference ? EdgeLabel::kDifference : EdgeLabel::kRawRating; }
  void validate() const;
};

// Read-only inputs shared by every scorer.
struct ModelContext {
  const InteractionGraph* graph = nullptr;
  const SocialGraph* social = nullptr;  // may be null when use_social is off
  const DecentralizedStats* stats = nullptr;
};

// Parameter layout of the scoring network.
class GdsRecModel {
 public:
  GdsRecModel(ModelConfig config, std::int32_t n_users, std::int32_t n_items, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ad::ParamStore& params() { return params_; }
  const ad::ParamStore& params() const { return params_; }
  std::int32_t n_users() const { return n_users_; }
  std::int32_t n_items() const { return n_items_; }

  // Re-draws every parameter from its initial uniform distribution.
  void initialize(std::uint64_t seed);

  struct SideParams {
    ad::ParamId w_in, b_in;      // neighbor feature transform
    ad::ParamId att_w1, att_b1;  // attention hidden layer
    ad::ParamId att_w2, att_b2;  // attention score
    ad::ParamId w_out, b_out;    // aggregation output
    ad::ParamId fallback;        // context for empty neighborhoods
  };
  struct Layout {
    ad::ParamId user_embedding, item_embedding, label_embedding;
    SideParams user_side, item_side;
    ad::ParamId pref_w1, pref_b1, pref_w2, pref_b2, pref_w3, pref_b3;
  };
  const Layout& layout() const { return layout_; }

 private:
  void add_side(const std::string& prefix, SideParams& side);

  ModelConfig config_;
  std::int32_t n_users_;
  std::int32_t n_items_;
  ad::ParamStore params_;
  Layout layout_{};
};

// Builds model outputs on one tape. Latent offsets are cached per node so a
// batch computes each user and item at most once. Neighborhood samples are a
// pure function of (sample_seed, epoch, node).
class Scorer {
 public:
  Scorer(const GdsRecModel& model, const ModelContext& ctx, ad::Tape& tape, std::uint64_t sample_seed,
         std::uint64_t epoch);

  ad::Tensor user_latent(std::int32_t u);
  ad::Tensor item_latent(std::int32_t v);
  // Attention weights used for the node's aggregation; empty for nodes
  // without neighbors.
  std::vector<double> user_attention(std::int32_t u);
  std::vector<double> item_attention(std::int32_t v);

  ad::Tensor preference(ad::Tensor hu, ad::Tensor hv);
  ad::Tensor fused(std::int32_t u, std::int32_t v);
  ad::Tensor predict(std::int32_t u, std::int32_t v);

  // 1/2 mean squared error over the batch plus the optional L2 term over the
  // parameters this tape touched.
  ad::Tensor batch_loss(std::span<const RatingRecord> batch);

  // Social neighbors kept for u with their renormalised coefficients.
  std::vector<std::pair<std::int32_t, double>> social_neighbors(std::int32_t u) const;

 private:
  struct Aggregation {
    ad::Tensor h;
    std::optional<ad::Tensor> weights;
  };
  Aggregation aggregate(bool user_side, std::int32_t node);
  ad::Tensor activate(ad::Tensor x);
  ad::Tensor embedding(ad::ParamId table, std::int32_t row);

  const GdsRecModel& model_;
  ModelContext ctx_;
  ad::Tape& tape_;
  std::uint64_t seed_;
  std::uint64_t epoch_;
  std::unordered_map<std::int32_t, Aggregation> user_cache_;
  std::unordered_map<std::int32_t, Aggregation> item_cache_;
  std::unordered_map<std::uint64_t, ad::Tensor> rows_;  // (table,row) -> gathered row
};

// Forward-only predictions for a list of pairs using the evaluation sample
// (epoch 0). Pairs are scored in chunks of `chunk` on fresh tapes; `workers`
// > 1 scores chunks concurrently with identical results.
std::vector<double> predict_pairs(const GdsRecModel& model, const ModelContext& ctx,
                                  std::span<const RatingRecord> pairs, std::uint64_t sample_seed,
                                  int workers = 1, std::size_t chunk = 512);

}  // namespace gdsrec
