#pragma once

#include <string_view>

namespace mdam {

std::string_view version();

}  // namespace mdam
