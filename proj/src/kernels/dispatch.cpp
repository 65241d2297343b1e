#include <atomic>
#include <cstdlib>
#include <string>

#include "qsdsim/error.hpp"
#include "qsdsim/kernels.hpp"

namespace qsdsim::kernels {
namespace {

Isa detect() noexcept {
  if (const char* forced = std::getenv("QSDSIM_ISA"); forced != nullptr && std::string(forced) == "scalar")
    return Isa::scalar;
  return isa_supported(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& current() noexcept {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

std::string_view to_string(Isa isa) noexcept { return isa == Isa::avx2 ? "avx2" : "scalar"; }

bool isa_supported(Isa isa) noexcept {
  if (isa == Isa::scalar) return true;
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Isa active_isa() noexcept { return current().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  require(isa_supported(isa), ErrorCode::invalid_parameter, "ISA not supported on this CPU");
  current().store(isa, std::memory_order_relaxed);
}

const KernelTable& active() noexcept {
  return active_isa() == Isa::avx2 ? avx2_table() : scalar_table();
}

}  // namespace qsdsim::kernels
