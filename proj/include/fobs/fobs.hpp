#pragma once

#include "fobs/core_model.hpp"
#include "fobs/cstr.hpp"
#include "fobs/expr.hpp"
#include "fobs/io.hpp"
#include "fobs/linear_design.hpp"
#include "fobs/nonlinear_design.hpp"
#include "fobs/observer_runtime.hpp"
#include "fobs/spectrum.hpp"
