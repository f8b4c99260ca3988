#include "ikl/common.hpp"

namespace ikl {

void require_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(want) +
                         ", got " + std::to_string(got));
  }
}

}  // namespace ikl
