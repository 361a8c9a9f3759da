#pragma once

#include <cstdint>
#include <string>

#include "lpal/csr.hpp"
#include "lpal/dataset.hpp"

namespace lpal {

// Two interleaved half circles with isotropic Gaussian noise. Row i has class i % 2.
Dataset make_two_moons(std::size_t n, double noise, std::uint64_t seed);

// `classes` isotropic Gaussians with centers uniform in [-box, box]^dim.
// Row i has class i % classes.
Dataset make_blobs(std::size_t n, std::size_t classes, std::size_t dim, double stddev, double box,
                   std::uint64_t seed);

// Three nodes on a line, labels {0, 1, 1}; pairs with chain_graph().
Dataset make_chain();

// Path 0 - 1 - 2 with unit weights.
CsrMatrix chain_graph();

}  // namespace lpal
