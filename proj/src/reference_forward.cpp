#include <cmath>

#include "chaosnet/errors.hpp"
#include "chaosnet/training.hpp"

namespace chaosnet {

namespace {

using Real = long double;

// Row-major [rows, cols] buffer of extended-precision values.
struct Mat {
  std::size_t rows = 0, cols = 0;
  std::vector<Real> v;

  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0L) {}
  Real& at(std::size_t i, std::size_t j) { return v[i * cols + j]; }
  Real at(std::size_t i, std::size_t j) const { return v[i * cols + j]; }
};

Real kernel(RadialKernelKind kind, Real s, Real sigma) {
  switch (kind) {
    case RadialKernelKind::gaussian:
      return std::exp(-s / (2.0L * sigma * sigma));
    case RadialKernelKind::multiquadric:
      return std::sqrt(1.0L + s / (sigma * sigma));
    case RadialKernelKind::inverse_multiquadric:
      return 1.0L / std::sqrt(1.0L + s / (sigma * sigma));
    case RadialKernelKind::thin_plate_spline:
      return s > 0.0L ? 0.5L * s * std::log(s) : 0.0L;
  }
  return 0.0L;
}

Mat rbf(RbfLayer& layer, const Mat& x) {
  const auto& cfg = layer.config();
  const Tensor& centers = layer.parameters()[0].value;
  const Tensor& weights = layer.parameters()[1].value;
  const Real sigma = std::exp(static_cast<Real>(layer.parameters()[2].value[0]));
  Mat out(x.rows, cfg.out_features);
  std::vector<Real> phi(cfg.num_kernels);
  for (std::size_t b = 0; b < x.rows; ++b) {
    Real sum = 0.0L;
    for (std::size_t k = 0; k < cfg.num_kernels; ++k) {
      Real s = 0.0L;
      for (std::size_t d = 0; d < cfg.in_dim; ++d) {
        const Real diff = x.at(b, d) - centers.at(k, d);
        s += diff * diff;
      }
      phi[k] = kernel(cfg.kernel.kind, s, sigma);
      sum += phi[k];
    }
    if (cfg.normalize) {
      const Real denom = std::max(sum, static_cast<Real>(kRbfNormalizeEpsilon));
      for (Real& p : phi) p /= denom;
    }
    for (std::size_t f = 0; f < cfg.out_features; ++f) {
      Real acc = 0.0L;
      for (std::size_t k = 0; k < cfg.num_kernels; ++k) acc += weights.at(f, k) * phi[k];
      out.at(b, f) = acc;
    }
  }
  return out;
}

Mat attention(AttentionLayer& layer, const Mat& h) {
  const Tensor& W = layer.parameters()[0].value;
  const Tensor& bias = layer.parameters()[1].value;
  const std::size_t F = layer.features();
  Mat out(h.rows, F);
  std::vector<Real> z(F);
  for (std::size_t b = 0; b < h.rows; ++b) {
    Real mx = -INFINITY;
    for (std::size_t i = 0; i < F; ++i) {
      Real acc = bias[i];
      for (std::size_t j = 0; j < F; ++j) acc += W.at(i, j) * h.at(b, j);
      z[i] = acc;
      mx = std::max(mx, acc);
    }
    Real sum = 0.0L;
    for (Real& zi : z) sum += (zi = std::exp(zi - mx));
    for (std::size_t i = 0; i < F; ++i) out.at(b, i) = z[i] / sum * h.at(b, i);
  }
  return out;
}

Mat linear(LinearLayer& layer, const Mat& x) {
  const Tensor& W = layer.parameters()[0].value;
  const Tensor& bias = layer.parameters()[1].value;
  Mat out(x.rows, layer.out_features());
  for (std::size_t b = 0; b < x.rows; ++b) {
    for (std::size_t o = 0; o < layer.out_features(); ++o) {
      Real acc = bias[o];
      for (std::size_t i = 0; i < layer.in_features(); ++i) acc += W.at(o, i) * x.at(b, i);
      out.at(b, o) = acc;
    }
  }
  return out;
}

Mat relu(Mat m) {
  for (Real& v : m.v) v = v > 0.0L ? v : 0.0L;
  return m;
}

Mat tanh(Mat m) {
  for (Real& v : m.v) v = std::tanh(v);
  return m;
}

Mat branch(Branch& br, const Mat& x) {
  Mat cols(x.rows, br.columns().size());
  for (std::size_t b = 0; b < x.rows; ++b) {
    for (std::size_t j = 0; j < br.columns().size(); ++j) cols.at(b, j) = x.at(b, br.columns()[j]);
  }
  // Dropout is the identity in eval mode.
  const Mat h = attention(br.attention, rbf(br.rbf, cols));
  return tanh(linear(br.output, relu(linear(br.hidden, h))));
}

}  // namespace

std::vector<long double> reference_forward(Model& model, const Tensor& x) {
  require_cols(x, kModelFeatures, "reference_forward");
  Mat in(x.rows(), 3);
  for (std::size_t i = 0; i < x.size(); ++i) in.v[i] = x[i];

  Mat merged_input(0, 0);
  LinearLayer* merge = nullptr;
  LinearLayer* head = nullptr;
  if (auto* mb = dynamic_cast<MultiBranchModel*>(&model)) {
    std::vector<Mat> outs;
    std::size_t width = 0;
    for (std::size_t i = 0; i < 3; ++i) {
      outs.push_back(branch(mb->branch(i), in));
      width += outs.back().cols;
    }
    merged_input = Mat(in.rows, width);
    for (std::size_t b = 0; b < in.rows; ++b) {
      std::size_t offset = 0;
      for (const Mat& o : outs) {
        for (std::size_t j = 0; j < o.cols; ++j) merged_input.at(b, offset + j) = o.at(b, j);
        offset += o.cols;
      }
    }
    merge = &mb->merge();
    head = &mb->head();
  } else if (auto* ss = dynamic_cast<SingleSequentialModel*>(&model)) {
    merged_input = branch(ss->branch(), in);
    merge = &ss->merge();
    head = &ss->head();
  } else {
    throw ContractError("reference_forward: unsupported model type");
  }
  return linear(*head, relu(linear(*merge, merged_input))).v;
}

}  // namespace chaosnet
