#pragma once

#include <Eigen/Core>
#include <compare>
#include <cstdint>
#include <string>
#include <vector>

namespace headprobe {

/// One attention head, addressed by (layer, head). Ordered by layer, then head.
struct HeadId {
  int layer = 0;
  int head = 0;

  friend auto operator<=>(const HeadId&, const HeadId&) = default;
};

std::string to_string(const HeadId& id);

/// Maps heads to their position in the concatenated head-output feature space.
///
/// Heads are numbered globally in (layer asc, head asc) order; global head i owns
/// feature coordinates [i * d_head, (i + 1) * d_head).
class HeadLayout {
 public:
  HeadLayout() = default;
  HeadLayout(std::vector<int> heads_per_layer, int d_head);

  int num_layers() const { return static_cast<int>(heads_per_layer_.size()); }
  int heads_in(int layer) const { return heads_per_layer_.at(static_cast<std::size_t>(layer)); }
  const std::vector<int>& heads_per_layer() const { return heads_per_layer_; }
  int total_heads() const { return total_; }
  int d_head() const { return d_head_; }
  Eigen::Index feature_dim() const { return Eigen::Index(total_) * d_head_; }

  bool contains(const HeadId& id) const;
  // Global index; throws InvalidArgument when out of bounds.
  int index(const HeadId& id) const;
  HeadId head_at(int index) const;
  Eigen::Index offset(const HeadId& id) const { return Eigen::Index(index(id)) * d_head_; }
  std::vector<HeadId> all_heads() const;

  template <typename Derived>
  auto slice(Eigen::MatrixBase<Derived>& features, const HeadId& id) const {
    return features.segment(offset(id), d_head_);
  }
  template <typename Derived>
  auto slice(const Eigen::MatrixBase<Derived>& features, const HeadId& id) const {
    return features.segment(offset(id), d_head_);
  }

  friend bool operator==(const HeadLayout&, const HeadLayout&) = default;

 private:
  std::vector<int> heads_per_layer_;
  std::vector<int> layer_start_;
  int d_head_ = 0;
  int total_ = 0;
};

/// A handcrafted head that attends from every position to earlier occurrences of
/// `trigger_token` and writes a refusal signal promoting `refusal_token`.
struct PlantedHead {
  HeadId head;
  int trigger_token = 0;
  int refusal_token = 0;

  friend bool operator==(const PlantedHead&, const PlantedHead&) = default;
};

struct ModelConfig {
  std::vector<int> heads_per_layer;
  int d_head = 8;
  int d_model = 64;
  int vocab_size = 64;
  int max_seq_len = 16;
  std::uint64_t seed = 0;
  std::vector<PlantedHead> planted;
  // Heads whose Q/K/V/O weights are all zero; they have no causal path.
  std::vector<HeadId> dead;

  // d_model = heads * d_head.
  static ModelConfig uniform(int layers, int heads, int d_head, int vocab_size, int max_seq_len,
                             std::uint64_t seed);

  int num_layers() const { return static_cast<int>(heads_per_layer.size()); }
  HeadLayout layout() const { return {heads_per_layer, d_head}; }

  // Distinct trigger / refusal tokens of planted heads, ascending.
  std::vector<int> trigger_tokens() const;
  std::vector<int> refusal_tokens() const;

  // Throws InvalidArgument describing the first violated constraint.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace headprobe
