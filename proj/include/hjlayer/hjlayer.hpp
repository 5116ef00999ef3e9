#pragma once

#include "hjlayer/characteristics.hpp"
#include "hjlayer/conjugate.hpp"
#include "hjlayer/errors.hpp"
#include "hjlayer/grid.hpp"
#include "hjlayer/hamiltonian.hpp"
#include "hjlayer/initial_data.hpp"
#include "hjlayer/polynomial.hpp"
#include "hjlayer/singularity.hpp"
#include "hjlayer/solver.hpp"
