#include "mdam/version.hpp"

#ifndef MDAM_VERSION
#define MDAM_VERSION "unknown"
#endif

namespace mdam {

std::string_view version() { return MDAM_VERSION; }

}  // namespace mdam
