#pragma once

#include "rational.hpp"
#include "enclosure.hpp"
#include "construction.hpp"
#include "stepcalc.hpp"
#include "presets.hpp"
#include "forcing.hpp"
#include "diagnostics.hpp"
#include "metrics.hpp"
#include "oracle.hpp"
#include "config.hpp"
