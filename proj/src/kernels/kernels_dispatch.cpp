#include <cstdlib>

#include "lict/kernels/kernels.hpp"

namespace lict::kernels {
namespace {

const Ops* resolve() {
  const char* force = std::getenv("LICT_FORCE_SCALAR");
  if (force && force[0] == '1') return &scalar_ops();
#if defined(__x86_64__) || defined(_M_X64)
  if (avx2_supported()) return &avx2_ops();
#endif
  return &scalar_ops();
}

}  // namespace

const Ops& ops() {
  static const Ops* active = resolve();
  return *active;
}

const char* active_isa() { return ops().name; }

}  // namespace lict::kernels
