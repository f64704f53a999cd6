#pragma once

// Energy-based key-frequency picking block. Each channel's representation
// is mapped to length Q, transformed to a half-spectrum, and for every bin
// one channel's complex value is chosen (by softmax sampling over channel
// energies, or by max/min energy). The chosen spectrum is the shared key,
// which is brought back to the time domain, projected, broadcast to all
// channels and fused through two residual MLP + LayerNorm stages.

#include "refocus/nn.hpp"
#include "refocus/tensor.hpp"

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace refocus {

enum class PickStrategy { Softmax, Max, Min };

PickStrategy parse_pick_strategy(std::string_view s);
std::string_view to_string(PickStrategy s);

/// Selection diagnostics for one sample.
struct PickTrace {
  RowMatrix probabilities;            // C x (Q/2+1), columns sum to 1
  std::vector<Index> chosen_channel;  // one per bin
};

std::string pick_trace_json(const PickTrace& trace);

/// Softmax over the channel axis (rows), independently per bin (column).
RowMatrix cross_channel_softmax(const Eigen::Ref<const RowMatrix>& energies);

struct KeyPick {
  Eigen::VectorXd re;
  Eigen::VectorXd im;
  PickTrace trace;
};

/// Per bin j, picks channel c_j and copies Hf[c_j, j]. Ties for max/min go
/// to the lowest channel index. Throws ContractError if a probability
/// column does not sum to 1 within 1e-9.
KeyPick pick_key_frequency(const Eigen::Ref<const RowMatrix>& hf_re, const Eigen::Ref<const RowMatrix>& hf_im,
                           const Eigen::Ref<const RowMatrix>& probs, PickStrategy strategy, Rng& rng);

struct EkpbBlock {
  Mlp entry_map;  // D -> D -> Q
  Linear skip_proj;  // D -> D
  Linear key_proj;   // Q -> D
  Mlp fuse_net;      // D -> D -> D
  LayerNorm fuse_norm;
  Mlp intra_net;  // D -> D -> D
  LayerNorm intra_norm;
  PickStrategy strategy = PickStrategy::Softmax;
  Index d = 0;
  Index q = 0;

  static EkpbBlock init(Index d, Index q, PickStrategy strategy, Activation act, Rng& rng);
  void collect(ParameterList& out, const std::string& prefix) const;
};

struct EkpbOutput {
  Tensor out;                     // [B*C x D]
  std::vector<PickTrace> traces;  // one per sample
  std::vector<Index> choices;     // [B x (Q/2+1)], flattened
};

struct EkpbOptions {
  /// Overrides the block's strategy (e.g. argmax at evaluation).
  std::optional<PickStrategy> strategy;
  /// Replays a previous selection, flattened [B x (Q/2+1)].
  std::span<const Index> forced_choices;
  bool keep_traces = true;
};

/// H is [B*C x D] with the C channels of each sample stored consecutively.
EkpbOutput ekpb_forward(const Tensor& h, Index channels, const EkpbBlock& block, Rng& rng,
                        const EkpbOptions& options = {});

}  // namespace refocus
