#include "refocus/ekpb.hpp"

#include "refocus/spectral.hpp"

#include <json.hpp>

#include <cmath>
#include <stdexcept>
#include <string>

namespace refocus {

PickStrategy parse_pick_strategy(std::string_view s) {
  if (s == "softmax") return PickStrategy::Softmax;
  if (s == "max") return PickStrategy::Max;
  if (s == "min") return PickStrategy::Min;
  throw std::invalid_argument("unknown picking strategy '" + std::string(s) + "'");
}

std::string_view to_string(PickStrategy s) {
  switch (s) {
    case PickStrategy::Softmax:
      return "softmax";
    case PickStrategy::Max:
      return "max";
    case PickStrategy::Min:
      return "min";
  }
  return "softmax";
}

std::string pick_trace_json(const PickTrace& trace) {
  nlohmann::json j;
  j["channels"] = trace.probabilities.rows();
  j["bins"] = trace.probabilities.cols();
  auto& probs = j["probabilities"] = nlohmann::json::array();
  for (Index c = 0; c < trace.probabilities.rows(); ++c) {
    std::vector<double> row(trace.probabilities.row(c).begin(), trace.probabilities.row(c).end());
    probs.push_back(row);
  }
  j["chosen_channel"] = trace.chosen_channel;
  return j.dump();
}

RowMatrix cross_channel_softmax(const Eigen::Ref<const RowMatrix>& energies) {
  if (!energies.allFinite() || (energies.array() < 0).any())
    throw ContractError("cross_channel_softmax: energies must be finite and non-negative");
  return softmax(Tensor::matrix(energies), 0).as_matrix();
}

KeyPick pick_key_frequency(const Eigen::Ref<const RowMatrix>& hf_re, const Eigen::Ref<const RowMatrix>& hf_im,
                           const Eigen::Ref<const RowMatrix>& probs, PickStrategy strategy, Rng& rng) {
  const Index c = hf_re.rows(), bins = hf_re.cols();
  if (hf_im.rows() != c || hf_im.cols() != bins || probs.rows() != c || probs.cols() != bins)
    throw DimensionError("pick_key_frequency: spectrum and probability shapes disagree");
  for (Index j = 0; j < bins; ++j)
    if (std::abs(probs.col(j).sum() - 1.0) > 1e-9)
      throw ContractError("pick_key_frequency: probability column " + std::to_string(j) + " does not sum to 1");

  KeyPick out;
  out.re.resize(bins);
  out.im.resize(bins);
  out.trace.probabilities = probs;
  out.trace.chosen_channel.resize(bins);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Index j = 0; j < bins; ++j) {
    Index pick = 0;
    if (strategy == PickStrategy::Softmax) {
      const double u = unit(rng);
      double cum = 0;
      pick = c - 1;
      for (Index ch = 0; ch < c; ++ch) {
        cum += probs(ch, j);
        if (u < cum) {
          pick = ch;
          break;
        }
      }
    } else {
      double best = hf_re(0, j) * hf_re(0, j) + hf_im(0, j) * hf_im(0, j);
      for (Index ch = 1; ch < c; ++ch) {
        const double e = hf_re(ch, j) * hf_re(ch, j) + hf_im(ch, j) * hf_im(ch, j);
        if ((strategy == PickStrategy::Max && e > best) || (strategy == PickStrategy::Min && e < best)) {
          best = e;
          pick = ch;
        }
      }
    }
    out.trace.chosen_channel[j] = pick;
    out.re[j] = hf_re(pick, j);
    out.im[j] = hf_im(pick, j);
  }
  return out;
}

EkpbBlock EkpbBlock::init(Index d, Index q, PickStrategy strategy, Activation act, Rng& rng) {
  if (d < 2 || q < 2 || d % 2 != 0 || q % 2 != 0) throw ContractError("EkpbBlock: D and Q must be even and >= 2");
  EkpbBlock b;
  b.entry_map = Mlp::init(d, d, q, act, rng);
  b.skip_proj = Linear::init(d, d, rng);
  b.key_proj = Linear::init(q, d, rng);
  b.fuse_net = Mlp::init(d, d, d, act, rng);
  b.fuse_norm = LayerNorm::init(d);
  b.intra_net = Mlp::init(d, d, d, act, rng);
  b.intra_norm = LayerNorm::init(d);
  b.strategy = strategy;
  b.d = d;
  b.q = q;
  return b;
}

void EkpbBlock::collect(ParameterList& out, const std::string& prefix) const {
  entry_map.collect(out, prefix + ".entry_map");
  skip_proj.collect(out, prefix + ".skip_proj");
  key_proj.collect(out, prefix + ".key_proj");
  fuse_net.collect(out, prefix + ".fuse_net");
  fuse_norm.collect(out, prefix + ".fuse_norm");
  intra_net.collect(out, prefix + ".intra_net");
  intra_norm.collect(out, prefix + ".intra_norm");
}

EkpbOutput ekpb_forward(const Tensor& h, Index channels, const EkpbBlock& block, Rng& rng,
                        const EkpbOptions& options) {
  if (h.rank() != 2 || h.cols() != block.d) throw DimensionError("ekpb_forward: expected [B*C x D]");
  if (channels < 1 || h.rows() % channels != 0) throw DimensionError("ekpb_forward: rows must be a multiple of C");
  const Index batch = h.rows() / channels;
  const Index bins = spectral::half_bins(block.q);
  const PickStrategy strategy = options.strategy.value_or(block.strategy);

  const Tensor hk = block.entry_map(h);
  const auto hf = rfft_rows(hk);

  EkpbOutput result;
  if (!options.forced_choices.empty()) {
    if (static_cast<Index>(options.forced_choices.size()) != batch * bins)
      throw DimensionError("ekpb_forward: forced selection has the wrong size");
    result.choices.assign(options.forced_choices.begin(), options.forced_choices.end());
  } else {
    result.choices.resize(batch * bins);
    const auto re_all = hf.re.as_matrix();
    const auto im_all = hf.im.as_matrix();
    for (Index b = 0; b < batch; ++b) {
      const auto re = re_all.middleRows(b * channels, channels);
      const auto im = im_all.middleRows(b * channels, channels);
      const RowMatrix energy = re.array().square() + im.array().square();
      const RowMatrix probs = cross_channel_softmax(energy);
      KeyPick pick = pick_key_frequency(re, im, probs, strategy, rng);
      for (Index j = 0; j < bins; ++j) result.choices[b * bins + j] = pick.trace.chosen_channel[j];
      if (options.keep_traces) result.traces.push_back(std::move(pick.trace));
    }
  }

  // Key path: gathered half-spectrum -> time domain -> Q->D -> broadcast.
  const Tensor key_re = gather_group_rows(hf.re, channels, result.choices);
  const Tensor key_im = gather_group_rows(hf.im, channels, result.choices);
  const Tensor key_time = irfft_rows(key_re, key_im, block.q);
  const Tensor key = repeat_rows(block.key_proj(key_time), channels);

  const Tensor hk_sum = add(block.skip_proj(h), key);
  const Tensor s1 = block.fuse_norm(add(hk_sum, block.fuse_net(hk_sum)));
  result.out = block.intra_norm(add(s1, block.intra_net(s1)));
  return result;
}

}  // namespace refocus
