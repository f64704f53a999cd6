#include "refocus/model.hpp"

#include "refocus/baselines.hpp"

#include <fstream>
#include <stdexcept>

namespace refocus {

void ReFocusConfig::validate(bool allow_no_blocks) const {
  auto fail = [](const std::string& what) { throw ContractError("ReFocusConfig: " + what); };
  if (channels < 1) fail("C must be at least 1");
  if (input_length < 2) fail("T must be at least 2");
  if (horizon < 1) fail("F must be at least 1");
  if (kernel < 1) fail("K must be at least 1");
  if (input_length < kernel) fail("T must be at least K");
  if (d < 2 || d % 2 != 0) fail("D must be even");
  if (q < 2 || q % 2 != 0) fail("Q must be even");
  if (blocks < (allow_no_blocks ? 0 : 1)) fail("N must be at least 1");
  if (!(beta >= 0.0 && beta <= 1.0)) fail("beta must lie in [0, 1]");
  if (!(eps >= 0.0)) fail("eps must be non-negative");
}

nlohmann::json to_json(const ReFocusConfig& cfg) {
  return {{"C", cfg.channels},
          {"T", cfg.input_length},
          {"F", cfg.horizon},
          {"D", cfg.d},
          {"Q", cfg.q},
          {"N", cfg.blocks},
          {"K", cfg.kernel},
          {"beta", cfg.beta},
          {"strategy", std::string(to_string(cfg.strategy))},
          {"eps", cfg.eps},
          {"seed", cfg.seed},
          {"ameo", cfg.use_ameo},
          {"head", cfg.head == HeadKind::Frequency ? "freq" : "linear"},
          {"activation", cfg.activation == Activation::Gelu ? "gelu" : "relu"},
          {"eval_argmax", cfg.eval_argmax}};
}

ReFocusConfig config_from_json(const nlohmann::json& j) {
  ReFocusConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "C") cfg.channels = value.get<Index>();
    else if (key == "T") cfg.input_length = value.get<Index>();
    else if (key == "F") cfg.horizon = value.get<Index>();
    else if (key == "D") cfg.d = value.get<Index>();
    else if (key == "Q") cfg.q = value.get<Index>();
    else if (key == "N") cfg.blocks = value.get<Index>();
    else if (key == "K") cfg.kernel = value.get<Index>();
    else if (key == "beta") cfg.beta = value.get<double>();
    else if (key == "strategy") cfg.strategy = parse_pick_strategy(value.get<std::string>());
    else if (key == "eps") cfg.eps = value.get<double>();
    else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
    else if (key == "ameo") cfg.use_ameo = value.get<bool>();
    else if (key == "head") {
      const auto s = value.get<std::string>();
      if (s == "freq") cfg.head = HeadKind::Frequency;
      else if (s == "linear") cfg.head = HeadKind::Linear;
      else throw std::invalid_argument("unknown head '" + s + "'");
    } else if (key == "activation") {
      const auto s = value.get<std::string>();
      if (s == "gelu") cfg.activation = Activation::Gelu;
      else if (s == "relu") cfg.activation = Activation::Relu;
      else throw std::invalid_argument("unknown activation '" + s + "'");
    } else if (key == "eval_argmax") cfg.eval_argmax = value.get<bool>();
    else throw std::invalid_argument("unknown key '" + key + "'");
  }
  return cfg;
}

ReFocusModel::ReFocusModel(const ReFocusConfig& cfg, Rng& rng) : config_(cfg) {
  cfg.validate(true);
  ameo = AmeoLayer::init(cfg.kernel, cfg.beta);
  embedding = FreqProjection::init(cfg.input_length, cfg.d, rng);
  for (Index i = 0; i < cfg.blocks; ++i)
    blocks.push_back(EkpbBlock::init(cfg.d, cfg.q, cfg.strategy, cfg.activation, rng));
  if (cfg.head == HeadKind::Frequency)
    head = FreqProjection::init(cfg.d, cfg.horizon, rng);
  else
    linear_head = Linear::init(cfg.d, cfg.horizon, rng);
}

Forecast ReFocusModel::forward(const Tensor& x, Index channels, Rng& rng, const ForecastOptions& options) const {
  if (x.rank() != 2 || x.cols() != config_.input_length) throw DimensionError("ReFocusModel: input must be [B*C x T]");
  if (channels < 1 || x.rows() % channels != 0) throw DimensionError("ReFocusModel: rows must be a multiple of C");
  if (!options.forced_choices.empty() && static_cast<Index>(options.forced_choices.size()) != config_.blocks)
    throw DimensionError("ReFocusModel: one forced selection per block is required");

  // Instance statistics are data, not graph inputs.
  const auto xm = x.as_matrix();
  const Eigen::VectorXd mu = xm.rowwise().mean();
  const Eigen::VectorXd sigma =
      ((xm.colwise() - mu).array().square().rowwise().sum() / double(xm.cols())).sqrt().matrix();
  const Eigen::VectorXd denom = sigma.array() + config_.eps;
  const Eigen::VectorXd inv = denom.cwiseInverse();

  Tensor h = rows_affine(x, inv, -mu.cwiseProduct(inv));
  if (config_.use_ameo) h = ameo_forward(h, ameo);
  h = embedding(h);

  Forecast result;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    EkpbOptions opt;
    opt.keep_traces = options.keep_traces;
    if (!options.training && config_.eval_argmax && config_.strategy == PickStrategy::Softmax)
      opt.strategy = PickStrategy::Max;
    if (!options.forced_choices.empty()) opt.forced_choices = options.forced_choices[i];
    auto out = ekpb_forward(h, channels, blocks[i], rng, opt);
    h = out.out;
    result.traces.push_back(std::move(out.traces));
    result.choices.push_back(std::move(out.choices));
  }
  const Tensor y = config_.head == HeadKind::Frequency ? head(h) : linear_head(h);
  result.y = rows_affine(y, denom, mu);
  return result;
}

ParameterList ReFocusModel::parameters() const {
  ParameterList out;
  if (config_.use_ameo) out.push_back({"ameo.kernel", ameo.kernel});
  embedding.collect(out, "embedding");
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect(out, "block" + std::to_string(i));
  if (config_.head == HeadKind::Frequency)
    head.collect(out, "head");
  else
    linear_head.collect(out, "head");
  return out;
}

std::pair<RowMatrix, std::vector<PickTrace>> model_forward(const ReFocusModel& model,
                                                           const Eigen::Ref<const RowMatrix>& x, Rng& rng) {
  ForecastOptions opt;
  opt.keep_traces = true;
  auto f = model.forward(Tensor::matrix(x), x.rows(), rng, opt);
  std::vector<PickTrace> traces;
  for (auto& block : f.traces) traces.push_back(std::move(block.front()));
  return {RowMatrix(f.y.as_matrix()), std::move(traces)};
}

Index param_count(const Forecaster& model) { return param_count(model.parameters()); }

nlohmann::json checkpoint_json(const Forecaster& model) {
  nlohmann::json j;
  j["magic"] = kCheckpointMagic;
  j["kind"] = model.kind();
  if (const auto* rf = dynamic_cast<const ReFocusModel*>(&model))
    j["config"] = to_json(rf->config());
  else
    j["config"] = {{"T", model.input_length()}, {"F", model.horizon()}};
  nlohmann::json params = nlohmann::json::object();
  for (const auto& p : model.parameters()) {
    const auto& d = p.tensor.data();
    params[p.name] = {{"shape", p.tensor.shape()}, {"values", std::vector<double>(d.begin(), d.end())}};
  }
  j["params"] = std::move(params);
  return j;
}

void save_checkpoint(const Forecaster& model, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path);
  os << checkpoint_json(model).dump() << '\n';
  if (!os) throw std::runtime_error("failed writing checkpoint " + path);
}

std::unique_ptr<Forecaster> load_checkpoint(const nlohmann::json& j) {
  if (!j.contains("magic") || j["magic"] != kCheckpointMagic) throw std::runtime_error("not a REFOCUS-CKPT-1 checkpoint");
  const std::string kind = j.at("kind").get<std::string>();
  Rng rng(0);
  std::unique_ptr<Forecaster> model;
  if (kind == "refocus") {
    model = std::make_unique<ReFocusModel>(config_from_json(j.at("config")), rng);
  } else if (kind == "linear") {
    model = std::make_unique<LinearForecaster>(j.at("config").at("T").get<Index>(), j.at("config").at("F").get<Index>(), rng);
  } else if (kind == "persistence") {
    model = std::make_unique<PersistenceForecaster>(j.at("config").at("T").get<Index>(), j.at("config").at("F").get<Index>());
  } else {
    throw std::runtime_error("unknown checkpoint kind '" + kind + "'");
  }
  const auto& params = j.at("params");
  for (const auto& p : model->parameters()) {
    if (!params.contains(p.name)) throw std::runtime_error("checkpoint lacks parameter " + p.name);
    const auto& entry = params.at(p.name);
    if (entry.at("shape").get<Shape>() != p.tensor.shape())
      throw std::runtime_error("checkpoint shape mismatch for " + p.name);
    const auto values = entry.at("values").get<std::vector<double>>();
    Tensor t = p.tensor;
    t.mutable_data() = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Index>(values.size()));
  }
  if (params.size() != model->parameters().size()) throw std::runtime_error("checkpoint has unexpected parameters");
  return model;
}

std::unique_ptr<Forecaster> load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read checkpoint " + path);
  return load_checkpoint(nlohmann::json::parse(is));
}

}  // namespace refocus
