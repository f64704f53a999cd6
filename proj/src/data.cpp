#include "refocus/data.hpp"

#include "refocus/spectral.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

namespace refocus {

namespace {

// RFC-4180 field splitting (quotes, doubled quotes); no embedded newlines.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

std::string quote_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q.push_back('"');
    q.push_back(c);
  }
  q.push_back('"');
  return q;
}

// Timestamps must not go backwards when they are all numeric or all share
// one fixed-width textual format.
void check_ordering(const std::vector<std::string>& ts) {
  if (ts.size() < 2) return;
  std::vector<double> numeric(ts.size());
  bool all_numeric = true;
  for (std::size_t i = 0; i < ts.size() && all_numeric; ++i) all_numeric = parse_double(ts[i], numeric[i]);
  bool same_width = true;
  for (const auto& t : ts) same_width = same_width && t.size() == ts.front().size();
  for (std::size_t i = 1; i < ts.size(); ++i) {
    const bool backwards = all_numeric ? numeric[i] < numeric[i - 1] : (same_width && ts[i] < ts[i - 1]);
    if (backwards)
      throw IngestError("row " + std::to_string(i + 1) + ": timestamp goes backwards", static_cast<Index>(i + 1), 1);
  }
}

}  // namespace

Dataset parse_csv(std::istream& in, const std::string& name) {
  std::string line;
  if (!std::getline(in, line)) throw IngestError("empty file: missing header", 0, 0);
  auto header = split_csv_line(line);
  for (auto& h : header) h = trim(h);
  if (header.size() < 2) throw IngestError("malformed header: need a timestamp column and at least one channel", 0, 0);
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c].empty()) throw IngestError("malformed header: empty column name", 0, static_cast<Index>(c + 1));

  Dataset ds;
  ds.name = name;
  ds.channel_names.assign(header.begin() + 1, header.end());
  const std::size_t n_channels = ds.channel_names.size();
  std::vector<std::vector<double>> cols(n_channels);
  Index row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw IngestError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) + " cells, got " +
                            std::to_string(cells.size()),
                        row, 0);
    ds.timestamps.push_back(trim(cells[0]));
    for (std::size_t c = 0; c < n_channels; ++c) {
      double v = 0;
      const std::string cell = trim(cells[c + 1]);
      if (!parse_double(cell, v))
        throw IngestError("row " + std::to_string(row) + ", column " + std::to_string(c + 2) + " ('" + header[c + 1] +
                              "'): non-numeric value '" + cell + "'",
                          row, static_cast<Index>(c + 2));
      cols[c].push_back(v);
    }
  }
  check_ordering(ds.timestamps);
  ds.values.resize(static_cast<Index>(n_channels), row);
  for (std::size_t c = 0; c < n_channels; ++c)
    for (Index t = 0; t < row; ++t) ds.values(static_cast<Index>(c), t) = cols[c][t];
  return ds;
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open " + path, 0, 0);
  auto name = path;
  if (const auto slash = name.find_last_of('/'); slash != std::string::npos) name = name.substr(slash + 1);
  return parse_csv(in, name);
}

void write_csv(std::ostream& out, const Dataset& ds) {
  out << "date";
  for (Index c = 0; c < ds.channels(); ++c)
    out << ',' << quote_field(c < static_cast<Index>(ds.channel_names.size()) ? ds.channel_names[c] : "ch" + std::to_string(c));
  out << "\r\n";
  char buf[64];
  for (Index t = 0; t < ds.length(); ++t) {
    out << quote_field(t < static_cast<Index>(ds.timestamps.size()) ? ds.timestamps[t] : std::to_string(t));
    for (Index c = 0; c < ds.channels(); ++c) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, ds.values(c, t));
      out << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << "\r\n";
  }
}

void write_csv(const std::string& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_csv(out, ds);
}

SplitSpec chronological_split(Index length, std::array<double, 3> ratios, Index lookback) {
  for (double r : ratios)
    if (r < 0) throw ContractError("chronological_split: ratios must be non-negative");
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) throw ContractError("chronological_split: ratios must sum to 1");
  if (lookback < 0) throw ContractError("chronological_split: negative lookback");
  // The small guard keeps products such as 0.6 * 17420 from flooring down.
  const auto boundary = [length](double r) {
    return std::min(length, static_cast<Index>(std::floor(r * double(length) + 1e-9)));
  };
  const Index train_end = boundary(ratios[0]);
  const Index val_end = boundary(ratios[0] + ratios[1]);
  SplitSpec s;
  s.lookback = lookback;
  s.train = {0, train_end};
  s.val = {std::max<Index>(0, train_end - lookback), val_end};
  s.test = {std::max<Index>(0, val_end - lookback), length};
  return s;
}

RowMatrix Scaler::transform(const Eigen::Ref<const RowMatrix>& values) const {
  return (values.colwise() - mean).array().colwise() / std.array();
}

RowMatrix Scaler::inverse(const Eigen::Ref<const RowMatrix>& values) const {
  return (values.array().colwise() * std.array()).colwise() + mean.array();
}

std::pair<Dataset, Scaler> standardize(const Dataset& ds, const SplitSpec& split) {
  if (split.train.length() <= 0) throw ContractError("standardize: empty train segment");
  const auto train = ds.values.middleCols(split.train.begin, split.train.length());
  Scaler sc;
  sc.mean = train.rowwise().mean();
  sc.std = ((train.colwise() - sc.mean).array().square().rowwise().sum() / double(train.cols())).sqrt().matrix();
  sc.std = sc.std.cwiseMax(1e-8);
  Dataset out = ds;
  out.values = sc.transform(ds.values);
  return {std::move(out), std::move(sc)};
}

std::vector<Index> window_origins(const Segment& segment, Index input_length, Index horizon) {
  std::vector<Index> out;
  const Index count = segment.length() - input_length - horizon + 1;
  for (Index i = 0; i < count; ++i) out.push_back(segment.begin + i);
  return out;
}

std::vector<WindowPair> windows(const Eigen::Ref<const RowMatrix>& values, const Segment& segment, Index input_length,
                                Index horizon) {
  if (segment.begin < 0 || segment.end > values.cols()) throw ContractError("windows: segment outside the series");
  std::vector<WindowPair> out;
  for (Index o : window_origins(segment, input_length, horizon))
    out.push_back({values.middleCols(o, input_length), values.middleCols(o + input_length, horizon), o});
  return out;
}

SharedKeyData synth_shared_key(Index channels, Index length, Index key_bin, const std::vector<Index>& carriers,
                               double snr, Rng& rng) {
  if (key_bin < 1 || 2 * key_bin >= length) throw ContractError("synth_shared_key: need 1 <= key_bin < L/2");
  std::vector<bool> is_carrier(static_cast<std::size_t>(channels), false);
  for (Index c : carriers) {
    if (c < 0 || c >= channels) throw ContractError("synth_shared_key: carrier channel out of range");
    is_carrier[c] = true;
  }
  if (!(snr > 0)) throw ContractError("synth_shared_key: snr must be positive");
  const double noise_std = std::isinf(snr) ? 0.0 : std::sqrt(0.5 / snr);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> jitter(-0.25 * std::numbers::pi, 0.25 * std::numbers::pi);
  const double base_phase = std::uniform_real_distribution<double>(0, 2 * std::numbers::pi)(rng);

  SharedKeyData out;
  out.truth = {key_bin, carriers, noise_std};
  auto& ds = out.dataset;
  ds.name = "synth_shared_key";
  ds.granularity = "synthetic";
  ds.values.resize(channels, length);
  for (Index c = 0; c < channels; ++c) {
    ds.channel_names.push_back("ch" + std::to_string(c));
    const double phase = base_phase + jitter(rng);
    for (Index t = 0; t < length; ++t) {
      double v = noise_std * noise(rng);
      if (is_carrier[c]) v += std::sin(2 * std::numbers::pi * double(key_bin * t % length) / double(length) + phase);
      ds.values(c, t) = v;
    }
  }
  return out;
}

Eigen::VectorXd synth_mid_gap(Index length, Index low_bins, double mid_leak, Rng& rng) {
  if (length < 8 || low_bins < 0 || low_bins >= length / 8)
    throw ContractError("synth_mid_gap: low_bins must be below L/8");
  const auto b = spectral::bands(length);
  std::uniform_real_distribution<double> phase(0, 2 * std::numbers::pi);
  std::uniform_int_distribution<Index> mid_bin(b.mid_begin, b.mid_end - 1);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(length);
  auto add_tone = [&](Index bin, double amp) {
    const double ph = phase(rng);
    for (Index t = 0; t < length; ++t)
      x[t] += amp * std::sin(2 * std::numbers::pi * double(bin * t % length) / double(length) + ph);
  };
  for (Index k = 1; k <= low_bins; ++k) add_tone(k, 1.0);
  const Index m = mid_bin(rng);
  if (mid_leak != 0.0) add_tone(m, mid_leak);
  return x;
}

Dataset synth_forecast_task(const ForecastTaskSpec& spec, Rng& rng) {
  std::uniform_real_distribution<double> phase(0, 2 * std::numbers::pi);
  std::uniform_real_distribution<double> gain(0.7, 1.3);
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset ds;
  ds.name = "synth_forecast";
  ds.granularity = "synthetic";
  ds.values = RowMatrix::Zero(spec.channels, spec.length);
  for (Index c = 0; c < spec.channels; ++c) {
    ds.channel_names.push_back("ch" + std::to_string(c));
    const double ph = phase(rng);
    const double period = spec.slow_period * gain(rng);
    for (Index t = 0; t < spec.length; ++t)
      ds.values(c, t) += spec.slow_amplitude * std::sin(2 * std::numbers::pi * double(t) / period + ph);
  }
  for (const auto& comp : spec.shared) {
    const double ph = phase(rng);
    for (Index c : comp.channels) {
      if (c < 0 || c >= spec.channels) throw ContractError("synth_forecast_task: channel out of range");
      const double a = comp.amplitude * gain(rng);
      for (Index t = 0; t < spec.length; ++t)
        ds.values(c, t) += a * std::sin(2 * std::numbers::pi * double(t) / comp.period + ph);
    }
  }
  for (Index c = 0; c < spec.channels; ++c)
    for (Index t = 0; t < spec.length; ++t) ds.values(c, t) += spec.noise_std * noise(rng);
  return ds;
}

}  // namespace refocus
