#pragma once

namespace lipgail {

inline constexpr const char* kVersionTag = "lipgail-0.1.0";

}
