#ifndef MASKCS_MASKCS_HPP
#define MASKCS_MASKCS_HPP

#include "dct.hpp"
#include "errors.hpp"
#include "experiments.hpp"
#include "format.hpp"
#include "forward_model.hpp"
#include "image_io.hpp"
#include "kernel.hpp"
#include "masks.hpp"
#include "operators.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "solvers.hpp"
#include "spectral.hpp"
#include "svg.hpp"
#include "synthetic.hpp"
#include "types.hpp"

#endif  // MASKCS_MASKCS_HPP
