#pragma once

// Data-parallel inner loops of the particle engine.
//
// Each kernel has a scalar reference implementation and an AVX2 variant; the
// variant is chosen once at runtime from CPUID and can be overridden (tests,
// QSDSIM_ISA=scalar). Element-wise kernels agree bit for bit across variants.
// Reductions use a fixed 4-lane blocked order in both variants, so they agree
// bit for bit as well.

#include <cstdint>
#include <span>
#include <string_view>

namespace qsdsim::kernels {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa) noexcept;
bool isa_supported(Isa isa) noexcept;
Isa active_isa() noexcept;
/// Throws invalid-parameter if the ISA is not supported on this CPU.
void set_active_isa(Isa isa);

struct KernelTable {
  /// x[i] = slopes[k[i]] * x[i] + intercepts[k[i]]
  void (*affine_gather)(std::span<double> x, std::span<const std::int32_t> k, std::span<const double> slopes,
                        std::span<const double> intercepts);
  /// out[i] = number of j < cdf.size()-1 with u[i] >= cdf[j]
  void (*select_outcomes)(std::span<const double> u, std::span<const double> cdf, std::span<std::int32_t> out);
  /// acc[i] -= c0 + c1 * x[i]
  void (*subtract_linear)(std::span<double> acc, std::span<const double> x, double c0, double c1);
  /// acc[i] += c
  void (*add_constant)(std::span<double> acc, double c);
  double (*max_value)(std::span<const double> v);
  double (*sum)(std::span<const double> v);
  double (*dot)(std::span<const double> a, std::span<const double> b);
};

const KernelTable& scalar_table() noexcept;
/// Only valid when isa_supported(Isa::avx2).
const KernelTable& avx2_table() noexcept;
const KernelTable& active() noexcept;

}  // namespace qsdsim::kernels
