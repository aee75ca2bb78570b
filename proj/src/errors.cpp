#include "mpnet/errors.hpp"

namespace mpnet {

int exit_code(ErrorClass cls) noexcept {
  switch (cls) {
  case ErrorClass::config:
    return 2;
  case ErrorClass::data:
    return 3;
  case ErrorClass::stage_order:
    return 4;
  }
  return 1;
}

} // namespace mpnet
