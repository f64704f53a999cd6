#pragma once

// End-to-end forecaster: instance normalization, mid-band optimizer,
// frequency-domain variate embedding T->D, N key-frequency blocks, head
// D->F and denormalization.

#include "refocus/ameo.hpp"
#include "refocus/ekpb.hpp"
#include "refocus/forecaster.hpp"

#include <json.hpp>

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace refocus {

enum class HeadKind { Frequency, Linear };

struct ReFocusConfig {
  Index channels = 7;
  Index input_length = 96;
  Index horizon = 96;
  Index d = 512;
  Index q = 128;
  Index blocks = 1;
  Index kernel = 25;
  double beta = 0.5;
  PickStrategy strategy = PickStrategy::Softmax;
  double eps = 1e-8;
  std::uint64_t seed = 2024;
  bool use_ameo = true;
  HeadKind head = HeadKind::Frequency;
  Activation activation = Activation::Gelu;
  bool eval_argmax = false;

  /// Throws ContractError naming the violated constraint. `allow_no_blocks`
  /// admits N = 0 for degenerate test assemblies.
  void validate(bool allow_no_blocks = false) const;
};

nlohmann::json to_json(const ReFocusConfig& cfg);
ReFocusConfig config_from_json(const nlohmann::json& j);

class ReFocusModel final : public Forecaster {
 public:
  /// Random initialization from `rng`.
  ReFocusModel(const ReFocusConfig& cfg, Rng& rng);

  std::string kind() const override { return "refocus"; }
  Index input_length() const override { return config_.input_length; }
  Index horizon() const override { return config_.horizon; }
  Forecast forward(const Tensor& x, Index channels, Rng& rng, const ForecastOptions& options) const override;
  ParameterList parameters() const override;

  const ReFocusConfig& config() const { return config_; }

  AmeoLayer ameo;
  FreqProjection embedding;  // T -> D
  std::vector<EkpbBlock> blocks;
  FreqProjection head;  // D -> F, when config().head == Frequency
  Linear linear_head;   // D -> F, when config().head == Linear

 private:
  ReFocusConfig config_;
};

/// Single window X[C x T] -> (Y_hat[C x F], one trace per block).
std::pair<RowMatrix, std::vector<PickTrace>> model_forward(const ReFocusModel& model,
                                                           const Eigen::Ref<const RowMatrix>& x, Rng& rng);

/// Exact count of learnable scalars.
Index param_count(const Forecaster& model);

inline constexpr const char* kCheckpointMagic = "REFOCUS-CKPT-1";

nlohmann::json checkpoint_json(const Forecaster& model);
void save_checkpoint(const Forecaster& model, const std::string& path);
/// Rebuilds the model described by a checkpoint. Throws std::runtime_error
/// on a bad magic string or a parameter shape mismatch.
std::unique_ptr<Forecaster> load_checkpoint(const nlohmann::json& j);
std::unique_ptr<Forecaster> load_checkpoint(const std::string& path);

}  // namespace refocus
