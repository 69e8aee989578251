#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chaosnet/tensor.hpp"

namespace chaosnet {

enum class RadialKernelKind { gaussian, multiquadric, inverse_multiquadric, thin_plate_spline };

std::string_view to_string(RadialKernelKind kind);
// Parses the lowercase snake_case name; nullopt for anything else.
std::optional<RadialKernelKind> parse_kernel_kind(std::string_view name);

// Radial function phi(r) with its shape parameter. sigma is unused by the thin plate spline.
struct RadialKernel {
  RadialKernelKind kind = RadialKernelKind::inverse_multiquadric;
  double sigma = 1.0;
};

// phi(r). Throws DomainError for r < 0 (or NaN) and for sigma <= 0 on kernels that use it.
// The thin plate spline r^2 log r is extended by its limit, phi(0) = 0.
double eval_kernel(const RadialKernel& kernel, double r);

// phi and its partial derivatives, parameterised by the squared distance s = r^2
// so that d/dx of phi(|x - c|) = 2 (x - c) * d_dsq is finite at the center for
// every kernel except the thin plate spline, where d_dsq is taken as 0 at s = 0.
struct KernelJet {
  double value = 0.0;
  double d_dsq = 0.0;
  double d_dlog_sigma = 0.0;
};
KernelJet eval_kernel_jet(const RadialKernel& kernel, double squared_distance);

enum class NormKind { euclidean };

std::string_view to_string(NormKind kind);
std::optional<NormKind> parse_norm_kind(std::string_view name);

// Throws DomainError on an empty vector.
double norm(NormKind kind, std::span<const double> v);

// Pairwise kernel matrix over a node set: matrix(i, j) = phi(|centers[j] - centers[i]|).
struct InterpolationSystem {
  std::vector<std::vector<double>> centers;
  Tensor matrix;
  RadialKernel kernel;
  NormKind norm = NormKind::euclidean;
};

// Throws DomainError for an empty center list or centers of unequal dimension.
InterpolationSystem build_interpolation_matrix(std::vector<std::vector<double>> centers,
                                               const RadialKernel& kernel,
                                               NormKind norm_kind = NormKind::euclidean);

inline constexpr double kDefaultSingularTolerance = 1e-12;

// Partial-pivot LU of an n x n matrix. A factorization exists only when every pivot
// magnitude exceeds tol * (largest Euclidean row norm of the input).
struct LuFactorization {
  Tensor lu;                         // packed unit-lower L and upper U
  std::vector<std::size_t> permutation;
  std::optional<std::size_t> failed_pivot;
};
LuFactorization lu_factorize(const Tensor& square, double tol = kDefaultSingularTolerance);

bool is_nonsingular(const InterpolationSystem& system, double tol = kDefaultSingularTolerance);

// Solves matrix * weights = values. Throws SingularSystemError naming the failing pivot.
std::vector<double> interpolate_fit(const InterpolationSystem& system,
                                    std::span<const double> values,
                                    double tol = kDefaultSingularTolerance);

// s(x) = sum_k weights_k phi(|x - c_k|).
double interpolate_eval(const InterpolationSystem& system, std::span<const double> weights,
                        std::span<const double> x);

}  // namespace chaosnet
