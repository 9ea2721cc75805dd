#pragma once

#include "elastic/types.hpp"
#include "elastic/rng.hpp"
#include "elastic/objectives.hpp"
#include "elastic/compression.hpp"
#include "elastic/state.hpp"
#include "elastic/oracle.hpp"
#include "elastic/theory.hpp"
#include "elastic/relaxations.hpp"
#include "elastic/kernel.hpp"
#include "elastic/io.hpp"
#include "elastic/harness.hpp"
