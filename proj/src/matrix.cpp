#include "chordgm/matrix.hpp"

#include <cmath>
#include <string>

#include "chordgm/tie_rule.hpp"

namespace chordgm {

Matrix log_of(const Matrix& probabilities) {
    Matrix out(probabilities.rows(), probabilities.cols());
    for (std::size_t r = 0; r < probabilities.rows(); ++r)
        for (std::size_t c = 0; c < probabilities.cols(); ++c) {
            const double p = probabilities(r, c);
            if (!(p >= 0.0) || !std::isfinite(p)) throw ModelError("probability entries must be finite and >= 0");
            out(r, c) = p == 0.0 ? kNegInf : std::log(p);
        }
    return out;
}

void require_row_stochastic(const Matrix& probabilities, const char* what, double tolerance) {
    for (std::size_t r = 0; r < probabilities.rows(); ++r) {
        double sum = 0.0;
        for (const double p : probabilities.row(r)) {
            if (!(p >= 0.0) || !std::isfinite(p))
                throw ModelError(std::string(what) + ": entries must be finite and non-negative");
            sum += p;
        }
        if (std::fabs(sum - 1.0) > tolerance)
            throw ModelError(std::string(what) + ": row " + std::to_string(r) + " sums to " + std::to_string(sum));
    }
}

} // namespace chordgm
