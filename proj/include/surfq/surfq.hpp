#pragma once

#include "surfq/errors.hpp"
#include "surfq/jet.hpp"
#include "surfq/expr.hpp"
#include "surfq/chart.hpp"
#include "surfq/geometry.hpp"
#include "surfq/grid.hpp"
#include "surfq/field.hpp"
#include "surfq/discrete_operator.hpp"
#include "surfq/operators.hpp"
#include "surfq/spectra.hpp"
#include "surfq/experiments.hpp"
#include "surfq/io.hpp"
