#pragma once

#include "toriclab/correction.hpp"
#include "toriclab/errors.hpp"
#include "toriclab/flows.hpp"
#include "toriclab/grid.hpp"
#include "toriclab/islands.hpp"
#include "toriclab/polytope.hpp"
#include "toriclab/potential.hpp"
#include "toriclab/quantization.hpp"
#include "toriclab/reference_forms.hpp"
