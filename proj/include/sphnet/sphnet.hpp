#pragma once

// Umbrella header.

#include "sphnet/data.hpp"
#include "sphnet/errors.hpp"
#include "sphnet/jet.hpp"
#include "sphnet/matrix.hpp"
#include "sphnet/model_io.hpp"
#include "sphnet/network.hpp"
#include "sphnet/optimizer.hpp"
#include "sphnet/random.hpp"
#include "sphnet/sphere.hpp"
#include "sphnet/trainer.hpp"
