#pragma once

#include "exitsim/adaptive.hpp"
#include "exitsim/coupling.hpp"
#include "exitsim/domain.hpp"
#include "exitsim/estimators.hpp"
#include "exitsim/integrators.hpp"
#include "exitsim/model.hpp"
#include "exitsim/parallel.hpp"
#include "exitsim/pde.hpp"
#include "exitsim/presets.hpp"
#include "exitsim/rng.hpp"
#include "exitsim/types.hpp"
