#pragma once

/**
 * @file lidym.hpp
 * @brief Convenience header pulling in the whole library.
 */

#include "lidym/chain.hpp"
#include "lidym/csv.hpp"
#include "lidym/dynamics.hpp"
#include "lidym/errors.hpp"
#include "lidym/evaluation.hpp"
#include "lidym/experiment.hpp"
#include "lidym/filter.hpp"
#include "lidym/identification.hpp"
#include "lidym/limopa.hpp"
#include "lidym/nn/network.hpp"
#include "lidym/parallel.hpp"
#include "lidym/plant.hpp"
#include "lidym/random.hpp"
#include "lidym/rotation_encoding.hpp"
#include "lidym/text_format.hpp"
#include "lidym/training.hpp"
