#include "chaosnet/rbf_core.hpp"

#include <array>
#include <cmath>
#include <utility>

#include "chaosnet/errors.hpp"

namespace chaosnet {

namespace {

constexpr std::array<std::pair<RadialKernelKind, std::string_view>, 4> kKernelNames{{
    {RadialKernelKind::gaussian, "gaussian"},
    {RadialKernelKind::multiquadric, "multiquadric"},
    {RadialKernelKind::inverse_multiquadric, "inverse_multiquadric"},
    {RadialKernelKind::thin_plate_spline, "thin_plate_spline"},
}};

void check_sigma(const RadialKernel& kernel) {
  if (kernel.kind == RadialKernelKind::thin_plate_spline) return;
  if (!(kernel.sigma > 0.0) || !std::isfinite(kernel.sigma)) {
    throw DomainError("kernel " + std::string(to_string(kernel.kind)) +
                      " requires sigma > 0, got " + std::to_string(kernel.sigma));
  }
}

}  // namespace

std::string_view to_string(RadialKernelKind kind) {
  for (const auto& [k, name] : kKernelNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::optional<RadialKernelKind> parse_kernel_kind(std::string_view name) {
  for (const auto& [k, n] : kKernelNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

double eval_kernel(const RadialKernel& kernel, double r) {
  if (!(r >= 0.0)) throw DomainError("eval_kernel: radius must be >= 0, got " + std::to_string(r));
  check_sigma(kernel);
  switch (kernel.kind) {
    case RadialKernelKind::gaussian:
      return std::exp(-(r * r) / (2.0 * kernel.sigma * kernel.sigma));
    case RadialKernelKind::multiquadric: {
      const double q = r / kernel.sigma;
      return std::sqrt(1.0 + q * q);
    }
    case RadialKernelKind::inverse_multiquadric: {
      const double q = r / kernel.sigma;
      return 1.0 / std::sqrt(1.0 + q * q);
    }
    case RadialKernelKind::thin_plate_spline:
      return r == 0.0 ? 0.0 : r * r * std::log(r);
  }
  return 0.0;
}

KernelJet eval_kernel_jet(const RadialKernel& kernel, double s) {
  if (!(s >= 0.0)) {
    throw DomainError("eval_kernel_jet: squared distance must be >= 0, got " + std::to_string(s));
  }
  check_sigma(kernel);
  KernelJet jet;
  const double sigma2 = kernel.sigma * kernel.sigma;
  switch (kernel.kind) {
    case RadialKernelKind::gaussian: {
      // phi = exp(-s / (2 sigma^2))
      jet.value = std::exp(-s / (2.0 * sigma2));
      jet.d_dsq = -jet.value / (2.0 * sigma2);
      jet.d_dlog_sigma = jet.value * s / sigma2;
      break;
    }
    case RadialKernelKind::multiquadric: {
      // phi = sqrt(1 + u), u = s / sigma^2
      const double u = s / sigma2;
      jet.value = std::sqrt(1.0 + u);
      jet.d_dsq = 0.5 / (jet.value * sigma2);
      jet.d_dlog_sigma = -u / jet.value;
      break;
    }
    case RadialKernelKind::inverse_multiquadric: {
      // phi = (1 + u)^(-1/2)
      const double u = s / sigma2;
      jet.value = 1.0 / std::sqrt(1.0 + u);
      const double cube = jet.value * jet.value * jet.value;
      jet.d_dsq = -0.5 * cube / sigma2;
      jet.d_dlog_sigma = u * cube;
      break;
    }
    case RadialKernelKind::thin_plate_spline: {
      // phi = r^2 log r = (s / 2) log s
      if (s > 0.0) {
        const double log_s = std::log(s);
        jet.value = 0.5 * s * log_s;
        jet.d_dsq = 0.5 * (log_s + 1.0);
      }
      break;
    }
  }
  return jet;
}

std::string_view to_string(NormKind) { return "euclidean"; }

std::optional<NormKind> parse_norm_kind(std::string_view name) {
  if (name == "euclidean") return NormKind::euclidean;
  return std::nullopt;
}

double norm(NormKind, std::span<const double> v) {
  if (v.empty()) throw DomainError("norm: empty vector");
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

InterpolationSystem build_interpolation_matrix(std::vector<std::vector<double>> centers,
                                               const RadialKernel& kernel, NormKind norm_kind) {
  if (centers.empty()) throw DomainError("build_interpolation_matrix: no centers");
  const std::size_t dim = centers.front().size();
  for (std::size_t i = 0; i < centers.size(); ++i) {
    if (centers[i].size() != dim) {
      throw DomainError("build_interpolation_matrix: center " + std::to_string(i) + " has dimension " +
                        std::to_string(centers[i].size()) + ", expected " + std::to_string(dim));
    }
  }
  const std::size_t n = centers.size();
  InterpolationSystem system{std::move(centers), Tensor::matrix(n, n), kernel, norm_kind};
  std::vector<double> diff(dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      for (std::size_t d = 0; d < dim; ++d) diff[d] = system.centers[j][d] - system.centers[i][d];
      const double phi = eval_kernel(kernel, norm(norm_kind, diff));
      system.matrix.at(i, j) = phi;
      system.matrix.at(j, i) = phi;
    }
  }
  return system;
}

LuFactorization lu_factorize(const Tensor& square, double tol) {
  if (square.rank() != 2 || square.rows() != square.cols()) {
    throw ContractError("lu_factorize: expected a square matrix, got " + shape_string(square.shape()));
  }
  const std::size_t n = square.rows();
  LuFactorization f{square, std::vector<std::size_t>(n), std::nullopt};
  for (std::size_t i = 0; i < n; ++i) f.permutation[i] = i;

  double max_row_norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (double v : square.row(i)) sum += v * v;
    max_row_norm = std::max(max_row_norm, std::sqrt(sum));
  }
  const double floor = tol * max_row_norm;
  if (!(max_row_norm > 0.0) || !std::isfinite(max_row_norm)) {
    if (n > 0) f.failed_pivot = 0;
    return f;
  }

  Tensor& a = f.lu;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pivot = k;
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(a.at(i, k)) > std::abs(a.at(pivot, k))) pivot = i;
    }
    if (!(std::abs(a.at(pivot, k)) > floor)) {
      f.failed_pivot = k;
      return f;
    }
    if (pivot != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a.at(k, j), a.at(pivot, j));
      std::swap(f.permutation[k], f.permutation[pivot]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double factor = a.at(i, k) / a.at(k, k);
      a.at(i, k) = factor;
      for (std::size_t j = k + 1; j < n; ++j) a.at(i, j) -= factor * a.at(k, j);
    }
  }
  return f;
}

bool is_nonsingular(const InterpolationSystem& system, double tol) {
  const Tensor& m = system.matrix;
  if (m.rank() != 2 || m.rows() != m.cols() || m.rows() == 0) return false;
  return !lu_factorize(m, tol).failed_pivot.has_value();
}

std::vector<double> interpolate_fit(const InterpolationSystem& system, std::span<const double> values,
                                    double tol) {
  const std::size_t n = system.matrix.rows();
  if (values.size() != n) {
    throw ContractError("interpolate_fit: " + std::to_string(values.size()) + " values for " +
                        std::to_string(n) + " centers");
  }
  const LuFactorization f = lu_factorize(system.matrix, tol);
  if (f.failed_pivot) {
    throw SingularSystemError(*f.failed_pivot, "interpolate_fit: singular interpolation matrix at pivot " +
                                                   std::to_string(*f.failed_pivot));
  }
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = values[f.permutation[i]];
    for (std::size_t j = 0; j < i; ++j) sum -= f.lu.at(i, j) * x[j];
    x[i] = sum;
  }
  for (std::size_t i = n; i-- > 0;) {
    double sum = x[i];
    for (std::size_t j = i + 1; j < n; ++j) sum -= f.lu.at(i, j) * x[j];
    x[i] = sum / f.lu.at(i, i);
  }
  return x;
}

double interpolate_eval(const InterpolationSystem& system, std::span<const double> weights,
                        std::span<const double> x) {
  if (weights.size() != system.centers.size()) {
    throw ContractError("interpolate_eval: weight count does not match center count");
  }
  std::vector<double> diff(x.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < system.centers.size(); ++k) {
    const auto& c = system.centers[k];
    if (c.size() != x.size()) throw DomainError("interpolate_eval: point dimension mismatch");
    for (std::size_t d = 0; d < x.size(); ++d) diff[d] = x[d] - c[d];
    sum += weights[k] * eval_kernel(system.kernel, norm(system.norm, diff));
  }
  return sum;
}

}  // namespace chaosnet
