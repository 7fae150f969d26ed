#include "gdsrec/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "gdsrec/error.hpp"

namespace gdsrec {

std::string to_string(AttentionMode mode) {
  switch (mode) {
    case AttentionMode::kSoftmax: return "softmax";
    case AttentionMode::kAverage: return "avg";
    case AttentionMode::kMax: return "max";
  }
  return "softmax";
}

AttentionMode parse_attention_mode(const std::string& s) {
  if (s == "softmax") return AttentionMode::kSoftmax;
  if (s == "avg" || s == "average") return AttentionMode::kAverage;
  if (s == "max") return AttentionMode::kMax;
  throw ConfigError("unknown attention mode '" + s + "' (expected softmax, avg or max)");
}

std::string to_string(Activation a) { return a == Activation::kRelu ? "relu" : "sigmoid"; }

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "sigmoid" || s == "logistic") return Activation::kSigmoid;
  throw ConfigError("unknown activation '" + s + "' (expected relu or sigmoid)");
}

void ModelConfig::validate() const {
  if (dim <= 0) throw ConfigError("embedding size must be positive");
  if (reservation <= 0) throw ConfigError("reservation K must be positive");
  if (social_reservation < 0) throw ConfigError("social reservation must be non-negative");
  if (delta < 0) throw ConfigError("delta must be non-negative");
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be non-negative");
  if (!(social_weight >= 0.0 && social_weight <= 1.0)) throw ConfigError("social weight must lie in [0,1]");
  if (!(embedding_init > 0.0)) throw ConfigError("embedding init scale must be positive");
  if (!(l2 >= 0.0)) throw ConfigError("l2 must be non-negative");
}

// ---------------------------------------------------------------------------

GdsRecModel::GdsRecModel(ModelConfig config, std::int32_t n_users, std::int32_t n_items, std::uint64_t seed)
    : config_(config), n_users_(n_users), n_items_(n_items) {
  config_.validate();
  if (n_users <= 0 || n_items <= 0) throw DataError("model needs at least one user and one item");
  const auto d = static_cast<std::size_t>(config_.dim);
  const auto labels = static_cast<std::size_t>(config_.use_rating_difference ? kLevelCount : kMaxRating);
  layout_.user_embedding = params_.add("user_embedding", static_cast<std::size_t>(n_users), d, true);
  layout_.item_embedding = params_.add("item_embedding", static_cast<std::size_t>(n_items), d, true);
  layout_.label_embedding = params_.add("label_embedding", labels, d, true);
  add_side("user", layout_.user_side);
  add_side("item", layout_.item_side);
  const auto h = static_cast<std::size_t>(config_.fusion_width());
  layout_.pref_w1 = params_.add("pref.w1", h, 2 * d);
  layout_.pref_b1 = params_.add("pref.b1", h, 0);
  layout_.pref_w2 = params_.add("pref.w2", h, h);
  layout_.pref_b2 = params_.add("pref.b2", h, 0);
  layout_.pref_w3 = params_.add("pref.w3", 1, h);
  layout_.pref_b3 = params_.add("pref.b3", 1, 0);
  params_.finalize();
  initialize(seed);
}

void GdsRecModel::add_side(const std::string& prefix, SideParams& side) {
  const auto d = static_cast<std::size_t>(config_.dim);
  const auto a = static_cast<std::size_t>(config_.attention_width());
  side.w_in = params_.add(prefix + ".w_in", d, 2 * d);
  side.b_in = params_.add(prefix + ".b_in", d, 0);
  side.att_w1 = params_.add(prefix + ".att_w1", a, 2 * d);
  side.att_b1 = params_.add(prefix + ".att_b1", a, 0);
  side.att_w2 = params_.add(prefix + ".att_w2", 1, a);
  side.att_b2 = params_.add(prefix + ".att_b2", 1, 0);
  side.w_out = params_.add(prefix + ".w_out", d, d);
  side.b_out = params_.add(prefix + ".b_out", d, 0);
  side.fallback = params_.add(prefix + ".fallback", d, 0);
}

void GdsRecModel::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto fill = [&](ad::ParamId id, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& x : params_[id].value) x = dist(rng);
  };
  const double emb = config_.embedding_init;
  fill(layout_.user_embedding, emb);
  fill(layout_.item_embedding, emb);
  fill(layout_.label_embedding, emb);
  // Linear layers: U[-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
  auto linear = [&](ad::ParamId w, ad::ParamId b) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(params_[w].cols));
    fill(w, bound);
    fill(b, bound);
  };
  for (const auto* side : {&layout_.user_side, &layout_.item_side}) {
    linear(side->w_in, side->b_in);
    linear(side->att_w1, side->att_b1);
    linear(side->att_w2, side->att_b2);
    linear(side->w_out, side->b_out);
    fill(side->fallback, emb);
  }
  linear(layout_.pref_w1, layout_.pref_b1);
  linear(layout_.pref_w2, layout_.pref_b2);
  linear(layout_.pref_w3, layout_.pref_b3);
}

// ---------------------------------------------------------------------------

namespace {
constexpr std::uint64_t kUserStream = 0x75736572;  // "user"
constexpr std::uint64_t kItemStream = 0x6974656d;  // "item"
constexpr std::uint64_t kSocialStream = 0x736f6369;
}  // namespace

Scorer::Scorer(const GdsRecModel& model, const ModelContext& ctx, ad::Tape& tape, std::uint64_t sample_seed,
               std::uint64_t epoch)
    : model_(model), ctx_(ctx), tape_(tape), seed_(sample_seed), epoch_(epoch) {
  if (!ctx_.graph || !ctx_.stats) throw std::invalid_argument("scorer needs an interaction graph and statistics");
  if (ctx_.graph->label != model.config().edge_label())
    throw ConfigError("interaction graph edge labels do not match the model's rating-difference setting");
  if (static_cast<std::int32_t>(ctx_.graph->user_adj.size()) > model.n_users() ||
      static_cast<std::int32_t>(ctx_.graph->item_adj.size()) > model.n_items())
    throw DataError("interaction graph is larger than the model vocabulary");
}

ad::Tensor Scorer::activate(ad::Tensor x) {
  return model_.config().activation == Activation::kRelu ? tape_.relu(x) : tape_.sigmoid(x);
}

ad::Tensor Scorer::embedding(ad::ParamId table, std::int32_t row) {
  const auto key = (static_cast<std::uint64_t>(table) << 32) | static_cast<std::uint32_t>(row);
  if (auto it = rows_.find(key); it != rows_.end()) return it->second;
  auto t = tape_.row(table, static_cast<std::size_t>(row));
  rows_.emplace(key, t);
  return t;
}

Scorer::Aggregation Scorer::aggregate(bool user_side, std::int32_t node) {
  auto& cache = user_side ? user_cache_ : item_cache_;
  if (auto it = cache.find(node); it != cache.end()) return it->second;

  const auto& layout = model_.layout();
  const auto& side = user_side ? layout.user_side : layout.item_side;
  const auto& cfg = model_.config();
  const auto& adj_all = user_side ? ctx_.graph->user_adj : ctx_.graph->item_adj;
  static const std::vector<InteractionEdge> kEmpty;
  const auto& adj = static_cast<std::size_t>(node) < adj_all.size() ? adj_all[static_cast<std::size_t>(node)] : kEmpty;

  const auto w_out = tape_.param(side.w_out);
  const auto b_out = tape_.param(side.b_out);
  Aggregation result;
  if (adj.empty()) {
    result.h = activate(tape_.affine(tape_.param(side.fallback), w_out, b_out));
    cache.emplace(node, result);
    return result;
  }

  const auto sample = sample_neighbors(adj.size(), cfg.reservation,
                                       mix_seed(seed_, user_side ? kUserStream : kItemStream), epoch_, node);
  const auto neighbor_table = user_side ? layout.item_embedding : layout.user_embedding;
  const auto self = embedding(user_side ? layout.user_embedding : layout.item_embedding, node);
  const auto w_in = tape_.param(side.w_in);
  const auto b_in = tape_.param(side.b_in);

  std::vector<ad::Tensor> features;
  features.reserve(sample.kept.size());
  for (auto pos : sample.kept) {
    const auto& e = adj[static_cast<std::size_t>(pos)];
    const auto neighbor = embedding(neighbor_table, e.id);
    const auto label = embedding(layout.label_embedding, ctx_.graph->embedding_row(e.level));
    features.push_back(activate(tape_.affine(tape_.concat(neighbor, label), w_in, b_in)));
  }

  ad::Tensor weights;
  const auto n = features.size();
  if (cfg.attention == AttentionMode::kAverage) {
    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    weights = tape_.constant(w);
  } else {
    const auto w1 = tape_.param(side.att_w1);
    const auto b1 = tape_.param(side.att_b1);
    const auto w2 = tape_.param(side.att_w2);
    const auto b2 = tape_.param(side.att_b2);
    std::vector<ad::Tensor> scores;
    scores.reserve(n);
    for (const auto& x : features) {
      const auto hidden = tape_.relu(tape_.affine(tape_.concat(x, self), w1, b1));
      scores.push_back(tape_.affine(hidden, w2, b2));
    }
    weights = tape_.softmax(tape_.concat(scores));
    if (cfg.attention == AttentionMode::kMax) weights = tape_.max_broadcast(weights);
  }
  result.weights = weights;
  result.h = activate(tape_.affine(tape_.weighted_sum(weights, features), w_out, b_out));
  cache.emplace(node, result);
  return result;
}

ad::Tensor Scorer::user_latent(std::int32_t u) { return aggregate(true, u).h; }
ad::Tensor Scorer::item_latent(std::int32_t v) { return aggregate(false, v).h; }

std::vector<double> Scorer::user_attention(std::int32_t u) {
  const auto a = aggregate(true, u);
  if (!a.weights) return {};
  const auto v = a.weights->values();
  return {v.begin(), v.end()};
}

std::vector<double> Scorer::item_attention(std::int32_t v) {
  const auto a = aggregate(false, v);
  if (!a.weights) return {};
  const auto w = a.weights->values();
  return {w.begin(), w.end()};
}

ad::Tensor Scorer::preference(ad::Tensor hu, ad::Tensor hv) {
  const auto& l = model_.layout();
  auto x = tape_.concat(hu, hv);
  x = activate(tape_.affine(x, tape_.param(l.pref_w1), tape_.param(l.pref_b1)));
  x = activate(tape_.affine(x, tape_.param(l.pref_w2), tape_.param(l.pref_b2)));
  return tape_.affine(x, tape_.param(l.pref_w3), tape_.param(l.pref_b3));
}

std::vector<std::pair<std::int32_t, double>> Scorer::social_neighbors(std::int32_t u) const {
  std::vector<std::pair<std::int32_t, double>> out;
  if (!model_.config().use_social || !ctx_.social) return out;
  const auto& all = ctx_.social->neighbors;
  if (u < 0 || static_cast<std::size_t>(u) >= all.size()) return out;
  const auto& list = all[static_cast<std::size_t>(u)];
  if (list.empty()) return out;

  const int cap = model_.config().social_reservation;
  std::vector<std::int32_t> kept;
  if (cap > 0) {
    kept = sample_neighbors(list.size(), cap, mix_seed(seed_, kSocialStream), epoch_, u).kept;
  } else {
    kept.resize(list.size());
    for (std::size_t i = 0; i < list.size(); ++i) kept[i] = static_cast<std::int32_t>(i);
  }
  double total = 0.0;
  for (auto pos : kept) total += list[static_cast<std::size_t>(pos)].lambda;
  for (auto pos : kept) {
    const auto& n = list[static_cast<std::size_t>(pos)];
    // A subsample whose coefficients are all zero falls back to uniform weights.
    const double w = total > 0.0 ? n.lambda / total : 1.0 / static_cast<double>(kept.size());
    out.emplace_back(n.id, w);
  }
  return out;
}

ad::Tensor Scorer::fused(std::int32_t u, std::int32_t v) {
  const auto hv = item_latent(v);
  const auto own = preference(user_latent(u), hv);
  const auto neighbors = social_neighbors(u);
  if (neighbors.empty()) return own;

  std::vector<ad::Tensor> scores;
  std::vector<double> lambdas;
  scores.reserve(neighbors.size());
  for (const auto& [k, lambda] : neighbors) {
    scores.push_back(preference(user_latent(k), hv));
    lambdas.push_back(lambda);
  }
  const auto social = tape_.dot(tape_.constant(lambdas), tape_.concat(scores));
  const double beta = model_.config().social_weight;
  return tape_.add(tape_.scale(own, 1.0 - beta), tape_.scale(social, beta));
}

ad::Tensor Scorer::predict(std::int32_t u, std::int32_t v) {
  const double base = 0.5 * model_.config().alpha * (ctx_.stats->user(u) + ctx_.stats->item(v));
  return tape_.add_scalar(fused(u, v), base);
}

ad::Tensor Scorer::batch_loss(std::span<const RatingRecord> batch) {
  if (batch.empty()) throw std::invalid_argument("batch_loss on an empty batch");
  std::vector<ad::Tensor> errors;
  errors.reserve(batch.size());
  for (const auto& r : batch) errors.push_back(tape_.add_scalar(predict(r.user, r.item), -r.rating));
  auto loss = tape_.scale(tape_.sum(tape_.square(tape_.concat(errors))), 0.5 / static_cast<double>(batch.size()));

  const double l2 = model_.config().l2;
  if (l2 > 0.0) {
    // Dense parameters in full, embedding tables over the rows gathered here.
    std::vector<ad::Tensor> touched;
    const auto& params = model_.params();
    for (ad::ParamId id = 0; id < params.size(); ++id)
      if (!params[id].row_sparse) touched.push_back(tape_.param(id));
    for (const auto& [key, t] : rows_) touched.push_back(t);
    std::vector<ad::Tensor> norms;
    norms.reserve(touched.size());
    for (const auto& t : touched) norms.push_back(tape_.dot(t, t));
    loss = tape_.add(loss, tape_.scale(tape_.sum(tape_.concat(norms)), 0.5 * l2));
  }
  return loss;
}

// ---------------------------------------------------------------------------

std::vector<double> predict_pairs(const GdsRecModel& model, const ModelContext& ctx,
                                  std::span<const RatingRecord> pairs, std::uint64_t sample_seed, int workers,
                                  std::size_t chunk) {
  std::vector<double> out(pairs.size());
  if (pairs.empty()) return out;
  chunk = std::max<std::size_t>(chunk, 1);
  const std::size_t n_chunks = (pairs.size() + chunk - 1) / chunk;

  auto run_chunk = [&](std::size_t c) {
    ad::Tape tape(&model.params());
    Scorer scorer(model, ctx, tape, sample_seed, 0);
    const auto begin = c * chunk;
    const auto end = std::min(pairs.size(), begin + chunk);
    for (auto i = begin; i < end; ++i) out[i] = scorer.predict(pairs[i].user, pairs[i].item).item();
  };

  workers = std::max(1, workers);
  if (workers == 1 || n_chunks == 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) run_chunk(c);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (auto c = static_cast<std::size_t>(w); c < n_chunks; c += static_cast<std::size_t>(workers)) run_chunk(c);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace gdsrec
