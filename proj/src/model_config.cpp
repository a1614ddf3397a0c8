#include "headprobe/model_config.hpp"

#include <algorithm>
#include <set>

#include "headprobe/errors.hpp"

namespace headprobe {

std::string to_string(const HeadId& id) {
  return "(" + std::to_string(id.layer) + "," + std::to_string(id.head) + ")";
}

HeadLayout::HeadLayout(std::vector<int> heads_per_layer, int d_head)
    : heads_per_layer_(std::move(heads_per_layer)), d_head_(d_head) {
  layer_start_.reserve(heads_per_layer_.size());
  for (int h : heads_per_layer_) {
    layer_start_.push_back(total_);
    total_ += h;
  }
}

bool HeadLayout::contains(const HeadId& id) const {
  return id.layer >= 0 && id.layer < num_layers() && id.head >= 0 &&
         id.head < heads_per_layer_[static_cast<std::size_t>(id.layer)];
}

int HeadLayout::index(const HeadId& id) const {
  if (!contains(id)) throw InvalidArgument("head " + to_string(id) + " outside model layout");
  return layer_start_[static_cast<std::size_t>(id.layer)] + id.head;
}

HeadId HeadLayout::head_at(int index) const {
  if (index < 0 || index >= total_) {
    throw InvalidArgument("head index " + std::to_string(index) + " outside model layout");
  }
  const auto it = std::upper_bound(layer_start_.begin(), layer_start_.end(), index);
  const int layer = static_cast<int>(it - layer_start_.begin()) - 1;
  return {layer, index - layer_start_[static_cast<std::size_t>(layer)]};
}

std::vector<HeadId> HeadLayout::all_heads() const {
  std::vector<HeadId> out;
  out.reserve(static_cast<std::size_t>(total_));
  for (int l = 0; l < num_layers(); ++l) {
    for (int h = 0; h < heads_in(l); ++h) out.push_back({l, h});
  }
  return out;
}

ModelConfig ModelConfig::uniform(int layers, int heads, int d_head, int vocab_size,
                                 int max_seq_len, std::uint64_t seed) {
  ModelConfig c;
  c.heads_per_layer.assign(static_cast<std::size_t>(std::max(layers, 0)), heads);
  c.d_head = d_head;
  c.d_model = heads * d_head;
  c.vocab_size = vocab_size;
  c.max_seq_len = max_seq_len;
  c.seed = seed;
  return c;
}

std::vector<int> ModelConfig::trigger_tokens() const {
  std::set<int> s;
  for (const auto& p : planted) s.insert(p.trigger_token);
  return {s.begin(), s.end()};
}

std::vector<int> ModelConfig::refusal_tokens() const {
  std::set<int> s;
  for (const auto& p : planted) s.insert(p.refusal_token);
  return {s.begin(), s.end()};
}

void ModelConfig::validate() const {
  if (heads_per_layer.empty()) throw InvalidArgument("model needs at least one layer");
  for (int h : heads_per_layer) {
    if (h < 1) throw InvalidArgument("every layer needs at least one head");
  }
  if (d_head < 2) throw InvalidArgument("d_head must be at least 2");
  for (int h : heads_per_layer) {
    if (h * d_head > d_model) {
      throw InvalidArgument("heads * d_head exceeds d_model in some layer");
    }
  }
  if (vocab_size < 2) throw InvalidArgument("vocab_size must be at least 2");
  if (max_seq_len < 1) throw InvalidArgument("max_seq_len must be positive");

  const HeadLayout lay = layout();
  std::set<HeadId> seen;
  for (const auto& p : planted) {
    if (!lay.contains(p.head)) {
      throw InvalidArgument("planted head " + to_string(p.head) + " out of bounds");
    }
    if (!seen.insert(p.head).second) {
      throw InvalidArgument("planted head " + to_string(p.head) + " listed twice");
    }
    if (p.trigger_token < 0 || p.trigger_token >= vocab_size || p.refusal_token < 0 ||
        p.refusal_token >= vocab_size) {
      throw InvalidArgument("planted head " + to_string(p.head) + " token outside vocabulary");
    }
  }
  for (const auto& d : dead) {
    if (!lay.contains(d)) throw InvalidArgument("dead head " + to_string(d) + " out of bounds");
    if (seen.count(d) != 0) {
      throw InvalidArgument("head " + to_string(d) + " cannot be both planted and dead");
    }
  }
  const auto triggers = trigger_tokens();
  const auto refusals = refusal_tokens();
  for (int t : triggers) {
    if (std::binary_search(refusals.begin(), refusals.end(), t)) {
      throw InvalidArgument("token " + std::to_string(t) + " is both a trigger and a refusal");
    }
  }
  // Reserved residual coordinates: one constant, one per trigger, one per refusal token.
  if (1 + static_cast<int>(triggers.size() + refusals.size()) > d_model) {
    throw InvalidArgument("d_model too small for the planted trigger/refusal channels");
  }
  // Corpus needs at least one ordinary token besides triggers and refusals.
  if (static_cast<int>(trigger_tokens().size() + refusals.size()) >= vocab_size) {
    throw InvalidArgument("vocabulary leaves no ordinary tokens");
  }
}

}  // namespace headprobe
