#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace specprec {

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `diag` and
/// off-diagonal `offdiag` (size m-1), returned in non-increasing order.
/// Implicit-shift QL with Wilkinson-type shifts (EISPACK tql1 lineage).
inline std::vector<double> tridiagonal_eigenvalues(std::vector<double> diag, const std::vector<double>& offdiag) {
    const std::size_t m = diag.size();
    if (m == 0) return {};
    if (offdiag.size() + 1 != m) throw std::invalid_argument("tridiagonal_eigenvalues: offdiag must have m-1 entries");

    std::vector<double> e(offdiag);
    e.push_back(0.0);
    auto& d = diag;
    const double eps = std::numeric_limits<double>::epsilon();
    const std::size_t max_sweeps = 30 * m;

    for (std::size_t l = 0; l < m; ++l) {
        std::size_t sweeps = 0;
        std::size_t mm = l;
        do {
            // find a negligible off-diagonal element at or below l
            for (mm = l; mm + 1 < m; ++mm) {
                const double dd = std::abs(d[mm]) + std::abs(d[mm + 1]);
                if (std::abs(e[mm]) <= eps * dd) break;
            }
            if (mm == l) break;
            if (sweeps++ == max_sweeps) throw std::runtime_error("tridiagonal_eigenvalues: QL did not converge");

            double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            double r = std::hypot(g, 1.0);
            g = d[mm] - d[l] + e[l] / (g + std::copysign(r, g));
            double s = 1.0;
            double c = 1.0;
            double p = 0.0;
            bool deflated_early = false;
            for (std::size_t ii = mm; ii-- > l;) {
                const double f = s * e[ii];
                const double b = c * e[ii];
                r = std::hypot(f, g);
                e[ii + 1] = r;
                if (r == 0.0) {
                    d[ii + 1] -= p;
                    e[mm] = 0.0;
                    deflated_early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[ii + 1] - p;
                r = (d[ii] - g) * s + 2.0 * c * b;
                p = s * r;
                d[ii + 1] = g + p;
                g = c * r - b;
            }
            if (deflated_early) continue;
            d[l] -= p;
            e[l] = g;
            e[mm] = 0.0;
        } while (mm != l);
    }
    std::sort(d.begin(), d.end(), std::greater<>());
    return d;
}

}  // namespace specprec
