#pragma once

#ifdef COUGHKIT_VENDORED_JSON
#include "json.hpp"
#else
#include <nlohmann/json.hpp>
#endif
