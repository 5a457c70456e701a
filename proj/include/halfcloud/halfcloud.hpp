#pragma once

#include "halfcloud/bounds.hpp"
#include "halfcloud/core_types.hpp"
#include "halfcloud/error.hpp"
#include "halfcloud/implicit.hpp"
#include "halfcloud/io.hpp"
#include "halfcloud/merge.hpp"
#include "halfcloud/parallel.hpp"
#include "halfcloud/spatial_index.hpp"
#include "halfcloud/synth.hpp"
#include "halfcloud/vec3.hpp"
