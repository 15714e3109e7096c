#pragma once

// Umbrella header: the whole library.

#include "ogrid/core.hpp"
#include "ogrid/mesh.hpp"
#include "ogrid/primitives.hpp"
#include "ogrid/mesh_queries.hpp"
#include "ogrid/sampling.hpp"
#include "ogrid/orientation.hpp"
#include "ogrid/cylinder.hpp"
#include "ogrid/dual_tree.hpp"
#include "ogrid/encoding.hpp"
#include "ogrid/features.hpp"
#include "ogrid/sparse_conv.hpp"
#include "ogrid/decoder.hpp"
#include "ogrid/field.hpp"
#include "ogrid/training.hpp"
#include "ogrid/eval.hpp"
#include "ogrid/marching_cubes.hpp"
#include "ogrid/metrics.hpp"
#include "ogrid/model_io.hpp"
#include "ogrid/run_config.hpp"
