#pragma once

// Channel mix-up augmentation, Adam, the real/pseudo training loop with
// early stopping, and MSE/MAE evaluation.

#include "refocus/forecaster.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace refocus {

enum class KetSchedule { Alternate, PseudoOnly, RealOnly };

KetSchedule parse_ket_schedule(std::string_view s);
std::string_view to_string(KetSchedule s);

struct KetConfig {
  bool enabled = false;
  double alpha_std = 1.0;
  KetSchedule schedule = KetSchedule::Alternate;
};

struct TrainConfig {
  double lr = 1e-4;
  Index batch_size = 32;
  Index max_epochs = 20;
  Index patience = 3;
  std::uint64_t seed = 2024;
  KetConfig ket;

  void validate() const;
};

/// Mixed batch plus the draws that produced it. alpha is B x C, perm is
/// B x C flattened (perm[b*C + c] is the source channel for channel c).
struct KetMix {
  RowMatrix x;
  RowMatrix y;
  RowMatrix alpha;
  std::vector<Index> perm;
};

/// Time-domain mix X'_b = X_b + alpha_b (row-wise) * X_b[perm_b, :]; the
/// same draws are applied to Y. Inputs are [B*C x T] and [B*C x F].
RowMatrix ket_apply(const Eigen::Ref<const RowMatrix>& x, Index channels, const Eigen::Ref<const RowMatrix>& alpha,
                    std::span<const Index> perm);

/// The same mix carried out on half-spectra: irfft(rfft(X) + alpha rfft(X[perm])).
RowMatrix ket_apply_spectral(const Eigen::Ref<const RowMatrix>& x, Index channels,
                             const Eigen::Ref<const RowMatrix>& alpha, std::span<const Index> perm);

/// Draws one uniform channel permutation and alpha ~ N(0, alpha_std^2)^C per
/// sample and applies them.
KetMix ket_mix(const Eigen::Ref<const RowMatrix>& x, const Eigen::Ref<const RowMatrix>& y, Index channels,
               double alpha_std, Rng& rng);

struct KetEquivalenceReport {
  double max_abs_diff = 0;  // over both X' and Y'
  bool passed = false;
};

KetEquivalenceReport verify_ket_equivalence(const Eigen::Ref<const RowMatrix>& x, const Eigen::Ref<const RowMatrix>& y,
                                            Index channels, const Eigen::Ref<const RowMatrix>& alpha,
                                            std::span<const Index> perm, double tol = 1e-10);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<Eigen::VectorXd> m;
  std::vector<Eigen::VectorXd> v;

  static AdamState for_parameters(const ParameterList& params, double lr);
};

/// Bias-corrected Adam update from the gradients stored on `params`.
/// Throws ContractError naming the parameter when a gradient is not finite.
void adam_step(const ParameterList& params, AdamState& state);

/// A set of windows over one channel-major series.
struct WindowSet {
  const RowMatrix* values = nullptr;
  std::vector<Index> origins;
  Index input_length = 0;
  Index horizon = 0;

  Index channels() const { return values->rows(); }
  std::size_t size() const { return origins.size(); }
};

struct Batch {
  RowMatrix x;  // [B*C x T]
  RowMatrix y;  // [B*C x F]
};

Batch assemble_batch(const WindowSet& set, std::span<const Index> members);

struct Metrics {
  double mse = 0;
  double mae = 0;
};

/// Mean squared / absolute error over every window, channel and step.
Metrics evaluate(const Forecaster& model, const WindowSet& set, Rng& rng, Index batch_size = 256);

struct EpochRecord {
  Index epoch = 0;
  double train_loss = 0;
  double val_mse = 0;
  double val_mae = 0;
};

struct BatchEvent {
  Index epoch = 0;
  Index batch = 0;
  bool pseudo = false;
  const Batch& original;
  const RowMatrix& inputs;
  const RowMatrix& targets;
};

struct TrainHooks {
  std::function<void(const BatchEvent&)> on_batch;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  Index best_epoch = 0;
  double best_val_mse = 0;
  std::vector<Eigen::VectorXd> best_parameters;
};

/// Shuffled mini-batch Adam on MSE. With the alternate schedule, even
/// batches are real and odd ones are mixed. Validation MSE is evaluated
/// after every epoch; training stops after `patience` epochs without
/// improvement and the model is left holding the best parameters.
TrainResult train(Forecaster& model, const WindowSet& train_set, const WindowSet& val_set, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

/// `epoch,train_loss,val_mse,val_mae`
std::string history_csv(const std::vector<EpochRecord>& history);

}  // namespace refocus
