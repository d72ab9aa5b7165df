#include <cstdlib>
#include <string>

#include "bhc/kernels.hpp"

namespace bhc::kernels {
namespace {

Isa select() {
  if (const char* env = std::getenv("BHC_KERNELS"); env != nullptr && std::string(env) == "scalar")
    return Isa::scalar;
  return avx2_table() != nullptr ? Isa::avx2 : Isa::scalar;
}

}  // namespace

Isa active_isa() {
  static const Isa isa = select();
  return isa;
}

const Table& active() {
  static const Table& t = active_isa() == Isa::avx2 ? *avx2_table() : scalar_table();
  return t;
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
  }
  return "unknown";
}

}  // namespace bhc::kernels
