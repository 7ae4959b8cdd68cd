#pragma once

// Umbrella header.

#include "gbt/blossom.hpp"
#include "gbt/builders.hpp"
#include "gbt/depth.hpp"
#include "gbt/efficiency.hpp"
#include "gbt/families.hpp"
#include "gbt/graph.hpp"
#include "gbt/io.hpp"
#include "gbt/matrix.hpp"
#include "gbt/parallel.hpp"
#include "gbt/quadrature.hpp"
#include "gbt/random.hpp"
#include "gbt/sample.hpp"
#include "gbt/simulate.hpp"
#include "gbt/twosample.hpp"
