#pragma once

#include "hsi/circulant_solver.hpp"
#include "hsi/hyper_laplacian.hpp"
#include "hsi/io.hpp"
#include "hsi/metrics.hpp"
#include "hsi/noise.hpp"
#include "hsi/priors.hpp"
#include "hsi/solver.hpp"
#include "hsi/tensor.hpp"
#include "hsi/tucker.hpp"
