#pragma once

#include "envlab/state.hpp"

#include <cstdint>
#include <random>

namespace envlab {

using Rng = std::mt19937_64;

// Haar-distributed unitary: QR of a complex Gaussian matrix with the phases of
// R's diagonal moved into Q.
CMatrix haar_unitary(int dim, Rng& rng);

CVector random_unit_vector(int dim, Rng& rng);

PureState random_state(std::vector<int> dims, Rng& rng, std::string label = {});

}  // namespace envlab
