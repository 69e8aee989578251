#include "chaosnet/forecast.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "chaosnet/errors.hpp"

namespace chaosnet {

namespace {

bool finite3(const Vec3& v) {
  return std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]);
}

void put_double(std::ostream& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.write(buf, res.ptr - buf);
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

Rollout rollout(Model& model, const Scaler& scaler, const ColumnMapping& mapping, const Vec3& seed_input,
                std::size_t steps) {
  if (!mapping.autoregressive()) {
    throw ConfigError(
        "rollout needs identical input and target columns: predictions are fed back as the next input");
  }
  if (steps == 0) throw ConfigError("rollout: steps must be >= 1");

  Rollout r;
  r.columns = mapping.target;
  r.seed_input = seed_input;
  r.steps = steps;
  Tensor x({1, 3}, std::vector<double>(seed_input.begin(), seed_input.end()));
  for (std::size_t k = 1; k <= steps; ++k) {
    x = model.forward(x, Mode::eval);
    const Vec3 out{x[0], x[1], x[2]};
    if (!finite3(out)) {
      r.truncated_at = k;
      break;
    }
    r.scaled.push_back(out);
    r.predictions.push_back(scaler.invert(mapping.target, out));
  }
  return r;
}

Rollout rollout_from(Model& model, const Scaler& scaler, const ColumnMapping& mapping,
                     std::span<const Window> windows, std::size_t start, std::size_t steps) {
  if (start >= windows.size()) throw ConfigError("rollout_from: start index past the last window");
  const Window& seed = windows[start];
  Rollout r = rollout(model, scaler, mapping, seed.input, steps);

  // Step k predicts the state k * lag rows after the seed, which is the target of
  // the window (k - 1) * lag positions later when the segment is unbroken.
  std::vector<Vec3> truth;
  for (std::size_t k = 1; k <= r.predictions.size(); ++k) {
    const std::size_t pos = start + (k - 1) * mapping.lag;
    if (pos >= windows.size()) break;
    const Window& w = windows[pos];
    if (w.segment != seed.segment || w.index != seed.index + (k - 1) * mapping.lag) break;
    truth.push_back(scaler.invert(mapping.target, w.target));
  }
  if (!r.predictions.empty() && truth.size() == r.predictions.size()) r.truth = std::move(truth);
  return r;
}

namespace {

MetricsReport finish(MetricsReport m, const Vec3& sq_sum) {
  double total = 0.0;
  for (std::size_t d = 0; d < 3; ++d) {
    m.mse[d] = m.samples ? sq_sum[d] / static_cast<double>(m.samples) : 0.0;
    m.rmse[d] = std::sqrt(m.mse[d]);
    total += sq_sum[d];
  }
  m.overall_mse = m.samples ? total / static_cast<double>(3 * m.samples) : 0.0;
  return m;
}

}  // namespace

MetricsReport one_step_metrics(Model& model, const Scaler& scaler, const ColumnMapping& mapping,
                               std::span<const Window> test_windows) {
  MetricsReport m;
  m.columns = mapping.target;
  m.samples = test_windows.size();
  Vec3 sq{};
  constexpr std::size_t kChunk = 512;
  for (std::size_t start = 0; start < test_windows.size(); start += kChunk) {
    const auto chunk = test_windows.subspan(start, std::min(kChunk, test_windows.size() - start));
    const Tensor pred = model.forward(windows_to_inputs(chunk), Mode::eval);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const Vec3 p = scaler.invert(mapping.target, Vec3{pred.at(i, 0), pred.at(i, 1), pred.at(i, 2)});
      const Vec3 t = scaler.invert(mapping.target, chunk[i].target);
      for (std::size_t d = 0; d < 3; ++d) sq[d] += (p[d] - t[d]) * (p[d] - t[d]);
    }
  }
  return finish(m, sq);
}

MetricsReport rollout_metrics(const Rollout& r) {
  if (!r.truth) throw ConfigError("rollout_metrics: rollout has no ground truth");
  MetricsReport m;
  m.columns = r.columns;
  m.samples = r.predictions.size();
  Vec3 sq{};
  for (std::size_t k = 0; k < r.predictions.size(); ++k) {
    double step = 0.0;
    for (std::size_t d = 0; d < 3; ++d) {
      const double e = r.predictions[k][d] - (*r.truth)[k][d];
      sq[d] += e * e;
      step += e * e;
    }
    m.horizon.push_back(step / 3.0);
  }
  return finish(m, sq);
}

std::string metrics_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["columns"] = {std::string(to_string(report.columns[0])), std::string(to_string(report.columns[1])),
                  std::string(to_string(report.columns[2]))};
  j["samples"] = report.samples;
  for (std::size_t d = 0; d < 3; ++d) j["mse_" + std::string(to_string(report.columns[d]))] = report.mse[d];
  for (std::size_t d = 0; d < 3; ++d) j["rmse_" + std::string(to_string(report.columns[d]))] = report.rmse[d];
  j["mse_overall"] = report.overall_mse;
  j["horizon_mse"] = report.horizon;
  return j.dump(1) + "\n";
}

void write_trajectory_csv(std::ostream& out, const Rollout& r) {
  out << "step,pred_1,pred_2,pred_3";
  if (r.truth) out << ",true_1,true_2,true_3";
  out << '\n';
  for (std::size_t k = 0; k < r.predictions.size(); ++k) {
    out << k + 1;
    for (double v : r.predictions[k]) {
      out << ',';
      put_double(out, v);
    }
    if (r.truth) {
      for (double v : (*r.truth)[k]) {
        out << ',';
        put_double(out, v);
      }
    }
    out << '\n';
  }
}

void export_trajectory(const Rollout& r, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  write_trajectory_csv(out, r);
}

Rollout read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("trajectory CSV: empty");
  const bool with_truth = line.find("true_1") != std::string::npos;
  Rollout r;
  std::vector<Vec3> truth;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> f;
    std::string_view rest(line);
    while (true) {
      const auto pos = rest.find(',');
      const auto cell = rest.substr(0, pos);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw DataError("trajectory CSV: bad number '" + std::string(cell) + "'");
      }
      f.push_back(v);
      if (pos == std::string_view::npos) break;
      rest.remove_prefix(pos + 1);
    }
    if (f.size() != (with_truth ? 7u : 4u)) throw DataError("trajectory CSV: wrong field count");
    r.predictions.push_back({f[1], f[2], f[3]});
    if (with_truth) truth.push_back({f[4], f[5], f[6]});
  }
  r.steps = r.predictions.size();
  if (with_truth) r.truth = std::move(truth);
  return r;
}

void export_losses(const TrainHistory& history, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  write_loss_csv(out, history);
}

// ---------------------------------------------------------------------------
// SVG

namespace {

std::string escape_xml(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

void write_svg(std::ostream& out, const PlotSpec& spec) {
  if (spec.series.size() > 2) throw ContractError("render_plot: at most two series");
  constexpr double W = 640, H = 480, left = 70, right = 20, top = 40, bottom = 55;
  constexpr std::array<const char*, 2> colors{"#1f77b4", "#111111"};

  auto ty = [&](double y) { return spec.log_y ? std::log10(std::max(y, 1e-300)) : y; };
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const PlotSeries& s : spec.series) {
    if (s.x.size() != s.y.size()) throw ContractError("render_plot: x/y length mismatch in '" + s.label + "'");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, ty(s.y[i]));
      ymax = std::max(ymax, ty(s.y[i]));
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmin -= 0.5, xmax += 0.5;
  if (ymax == ymin) ymin -= 0.5, ymax += 0.5;
  const double pw = W - left - right, ph = H - top - bottom;
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return top + ph - (ty(y) - ymin) / (ymax - ymin) * ph; };

  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << escape_xml(spec.title) << "</text>\n";
  out << "<g stroke=\"#444\" fill=\"none\">\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
      << "\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph << "\"/>\n";
  out << "</g>\n";

  out << "<g fill=\"#333\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = xmin + (xmax - xmin) * i / 4.0;
    const double fy = ymin + (ymax - ymin) * i / 4.0;
    const double sx = left + pw * i / 4.0;
    const double sy = top + ph - ph * i / 4.0;
    out << "<text x=\"" << coord(sx) << "\" y=\"" << coord(top + ph + 16) << "\" text-anchor=\"middle\">"
        << fmt(fx) << "</text>\n";
    out << "<text x=\"" << coord(left - 6) << "\" y=\"" << coord(sy + 4) << "\" text-anchor=\"end\">"
        << fmt(spec.log_y ? std::pow(10.0, fy) : fy) << "</text>\n";
  }
  out << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
      << escape_xml(spec.x_label) << "</text>\n";
  out << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << top + ph / 2 << ")\">" << escape_xml(spec.y_label) << "</text>\n";
  out << "</g>\n";

  for (std::size_t si = 0; si < spec.series.size(); ++si) {
    const PlotSeries& s = spec.series[si];
    const char* color = colors[si];
    if (s.points) {
      out << "<g fill=\"" << color << "\">\n";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        out << "<circle cx=\"" << coord(px(s.x[i])) << "\" cy=\"" << coord(py(s.y[i])) << "\" r=\"1.6\"/>\n";
      }
      out << "</g>\n";
    } else {
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        out << coord(px(s.x[i])) << ',' << coord(py(s.y[i])) << ' ';
      }
      out << "\"/>\n";
    }
    const double ly = top + 14 + 16 * static_cast<double>(si);
    out << "<rect x=\"" << left + pw - 150 << "\" y=\"" << ly - 9 << "\" width=\"10\" height=\"10\" fill=\""
        << color << "\"/>\n";
    out << "<text x=\"" << left + pw - 134 << "\" y=\"" << ly << "\">" << escape_xml(s.label) << "</text>\n";
  }
  out << "</svg>\n";
}

void render_plot(const PlotSpec& spec, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  write_svg(out, spec);
}

}  // namespace chaosnet
