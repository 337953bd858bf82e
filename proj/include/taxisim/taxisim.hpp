#pragma once

// Umbrella header.

#include "taxisim/grid.hpp"
#include "taxisim/reduce.hpp"
#include "taxisim/operators.hpp"
#include "taxisim/sensitivity.hpp"
#include "taxisim/linsolve.hpp"
#include "taxisim/species.hpp"
#include "taxisim/fluid.hpp"
#include "taxisim/functionals.hpp"
#include "taxisim/driver.hpp"
#include "taxisim/oracle.hpp"
#include "taxisim/config.hpp"
#include "taxisim/io.hpp"
