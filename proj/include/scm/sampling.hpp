#pragma once

#include <cstdint>

#include "scm/model.hpp"

namespace scm {

/// n rows i.i.d. from the law; a pure function of (law, n, seed, stream).
/// Gaussian rows are L z with L the Cholesky factor of Sigma.
Matrix gen_design(const DesignLaw& law, Eigen::Index n, std::uint64_t seed, std::uint64_t stream = 0);

/// Responses for the rows of X under theta. Labels are returned in the
/// encoding of the loss ({0,1} or {-1,+1}). Throws InvalidArgument when the
/// mechanism cannot produce responses in the loss's response space.
Vector gen_response(const ResponseMechanism& mech, const Matrix& x, const LossModel& loss, const Vector& theta,
                    std::uint64_t seed, std::uint64_t stream = 0);

/// Throws InvalidArgument unless mechanism and loss are compatible.
void check_compatible(const ResponseMechanism& mech, const LossModel& loss);

/// Standard logistic sigmoid, stable for large |t|.
double sigmoid(double t);

}  // namespace scm
