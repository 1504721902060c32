#include "specprec/oracle.hpp"
#include "specprec/precond.hpp"
#include "specprec/spectra.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <memory>
#include <random>

using namespace specprec;

namespace {

Vector gaussian(Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = g(rng);
    return v;
}

Vector random_spectrum(Index n, double decades, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, decades);
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = std::pow(10.0, u(rng));
    std::sort(v.begin(), v.end(), std::greater<>());
    return Eigen::Map<Vector>(v.data(), n);
}

std::vector<Index> one_based(const std::vector<Index>& idx) {
    std::vector<Index> out;
    for (Index i : idx) out.push_back(i + 1);
    return out;
}

Vector sorted_desc(Vector v) {
    std::sort(v.begin(), v.end(), std::greater<>());
    return v;
}

}  // namespace

TEST(SelectIndexSet, DropsLargestWhenTopIsSpread) {
    const SpectralData s = select_index_set(Vector{{1000.0, 500.0, 4.0, 3.0, 2.0, 1.0}}, 2);
    EXPECT_EQ(one_based(s.indices), (std::vector<Index>{1, 2}));
    EXPECT_EQ(*s.complement_begin + 1, 3);  // j0
    EXPECT_EQ(s.selection_case(), 1);
    EXPECT_EQ(s.complement_largest, 4.0);
    EXPECT_EQ(s.complement_smallest, 1.0);
}

TEST(SelectIndexSet, DropsSmallestWhenBottomIsSpread) {
    const SpectralData s = select_index_set(Vector{{4.0, 3.0, 2.0, 0.002, 0.001}}, 2);
    EXPECT_EQ(one_based(s.indices), (std::vector<Index>{4, 5}));
    EXPECT_EQ(*s.complement_begin, 0);
    EXPECT_EQ(s.selection_case(), 2);
}

TEST(SelectIndexSet, MixedCase) {
    // both ends spread: drop lambda_1 and lambda_n
    const SpectralData s = select_index_set(Vector{{100.0, 5.0, 4.0, 3.0, 0.01}}, 2);
    EXPECT_EQ(one_based(s.indices), (std::vector<Index>{1, 5}));
    EXPECT_EQ(s.selection_case(), 3);
    EXPECT_EQ(s.complement(), (std::vector<Index>{1, 2, 3}));
}

TEST(SelectIndexSet, ConstantSpectrumTiesToFirstWindow) {
    const SpectralData s = select_index_set(Vector::Constant(6, 2.5), 3);
    EXPECT_EQ(*s.complement_begin, 0);
    EXPECT_EQ(one_based(s.indices), (std::vector<Index>{4, 5, 6}));
}

TEST(SelectIndexSet, RangeChecks) {
    const Vector l{{3.0, 2.0, 1.0}};
    EXPECT_THROW(select_index_set(l, 0), std::out_of_range);
    EXPECT_THROW(select_index_set(l, 3), std::out_of_range);
    EXPECT_NO_THROW(select_index_set(l, 2));
    EXPECT_THROW(select_index_set(Vector{{1.0, 2.0}}, 1), std::invalid_argument);
}

TEST(SelectIndexSet, ExhaustivelyOptimal) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 20; ++trial) {
        const Index n = 6 + trial % 7;  // 6..12
        const Vector l = random_spectrum(n, 5.0, rng);
        for (Index k = 1; k <= 4; ++k) {
            const SpectralData s = select_index_set(l, k);
            std::vector<Index> comb(static_cast<std::size_t>(k));
            for (Index i = 0; i < k; ++i) comb[static_cast<std::size_t>(i)] = i;
            double best = std::numeric_limits<double>::infinity();
            do {
                const auto rest = detail::complement_of(comb, n);
                best = std::min(best, l[rest.front()] / l[rest.back()]);
            } while (detail::next_combination(comb, n));
            EXPECT_EQ(s.complement_largest / s.complement_smallest, best) << "n=" << n << " k=" << k;
        }
    }
}

TEST(ScaledPreconditioner, SingletonAtOwnEigenvalueIsIdentity) {
    const Vector l{{4.0, 2.0, 1.0}};
    const auto f = build_preconditioner(make_spectral_data(l, {1}), 2.0);
    EXPECT_EQ(f.update().coefficients()[0], 0.0);
    std::mt19937_64 rng(1);
    const Vector y = gaussian(3, rng);
    EXPECT_EQ(apply_preconditioner(f, y), y);
}

TEST(ScaledPreconditioner, ClustersSelectedEigenvalues) {
    const Vector l{{4.0, 2.0, 1.0}};
    const auto f = build_preconditioner(make_spectral_data(l, {0}), 2.0);
    const Matrix fd = f.update().to_dense();
    EXPECT_TRUE(fd.isApprox(Vector{{0.5, 1.0, 1.0}}.asDiagonal().toDenseMatrix(), 1e-15));
    const Vector fa = sorted_desc((fd * l.asDiagonal()).diagonal());
    EXPECT_TRUE(fa.isApprox(Vector{{2.0, 2.0, 1.0}}, 1e-15));
}

TEST(ScaledPreconditioner, KEqualsNMinusOneIsValid) {
    const Vector l{{4.0, 2.0, 1.0}};
    EXPECT_NO_THROW(build_preconditioner(select_index_set(l, 2), 1.0));
}

TEST(ScaledPreconditioner, RejectsNonPositiveTheta) {
    const SpectralData s = select_index_set(Vector{{4.0, 2.0, 1.0}}, 1);
    EXPECT_THROW(build_preconditioner(s, 0.0), std::invalid_argument);
    EXPECT_THROW(build_preconditioner(s, -1.0), std::invalid_argument);
    EXPECT_THROW(ThetaStrategy::fixed(0.0), std::invalid_argument);
}

TEST(ScaledPreconditioner, EigenActionAndOrthogonalComplement) {
    std::mt19937_64 rng(77);
    const Index n = 30;
    const Vector l = random_spectrum(n, 3.0, rng);
    const auto op = DenseSpdOperator::random(l, rng);
    const SpectralData s = select_index_set(op, 5);
    const double theta = 0.7 * l[n - 1];
    const auto f = build_preconditioner(s, theta);
    for (Index i = 0; i < n; ++i) {
        const Vector si = op.eigenvector(i);
        const bool selected = std::find(s.indices.begin(), s.indices.end(), i) != s.indices.end();
        const double expect = selected ? theta / l[i] : 1.0;
        EXPECT_LE((apply_preconditioner(f, si) - expect * si).norm(), 1e-13 * std::max(1.0, expect));
        EXPECT_LE((apply_square_root(f, si) - std::sqrt(expect) * si).norm(), 1e-13 * std::max(1.0, expect));
    }
}

TEST(ScaledPreconditioner, MatchesDenseFormAndCountsOperations) {
    std::mt19937_64 rng(5);
    const Index n = 50, k = 7;
    const Vector l = random_spectrum(n, 4.0, rng);
    const auto f = build_preconditioner(select_index_set(l, k), 3.0);
    Matrix dense = Matrix::Identity(n, n);
    for (std::size_t j = 0; j < f.spectral().indices.size(); ++j) {
        const Index i = f.spectral().indices[j];
        dense(i, i) = 3.0 / l[i];
    }
    const Vector y = gaussian(n, rng);
    ApplyCounts counts;
    const Vector z = apply_preconditioner(f, y, &counts);
    EXPECT_LE((z - dense * y).norm(), 1e-14 * z.norm());
    EXPECT_EQ(counts.inner_products, static_cast<std::size_t>(k));
    EXPECT_EQ(counts.axpys, static_cast<std::size_t>(k));
}

TEST(ScaledPreconditioner, SquareRootSquaresToF) {
    std::mt19937_64 rng(8);
    const Index n = 50;
    const Vector l = random_spectrum(n, 4.0, rng);
    const auto op = DenseSpdOperator::random(l, rng);
    const auto f = build_preconditioner(select_index_set(op, 6), 2.0);
    const Vector y = gaussian(n, rng);
    const Vector uuy = apply_square_root(f, apply_square_root(f, y));
    const Vector fy = apply_preconditioner(f, y);
    EXPECT_LE((uuy - fy).norm(), 1e-12 * fy.norm());
    Matrix u(n, n);
    for (Index j = 0; j < n; ++j) u.col(j) = apply_square_root(f, Vector::Unit(n, j));
    EXPECT_LE((u - u.transpose()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(ScaledPreconditioner, SpdAndSpectrumMapping) {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 5; ++trial) {
        const Index n = 40, k = 1 + trial * 3;
        const Vector l = random_spectrum(n, 3.0, rng);
        const auto op = DenseSpdOperator::random(l, rng);
        const SpectralData s = select_index_set(op, k);
        std::uniform_real_distribution<double> th(0.1, 2000.0);
        const double theta = th(rng);
        const auto f = build_preconditioner(s, theta);

        Eigen::SelfAdjointEigenSolver<Matrix> fe(f.update().to_dense(), Eigen::EigenvaluesOnly);
        EXPECT_GT(fe.eigenvalues().minCoeff(), 0.0);

        // F A is similar to U A U
        Matrix u(n, n);
        for (Index j = 0; j < n; ++j) u.col(j) = apply_square_root(f, Vector::Unit(n, j));
        const Matrix uau = u * op.to_dense() * u;
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (uau + uau.transpose()), Eigen::EigenvaluesOnly);
        Vector expected(n);
        Index pos = 0;
        for (Index j = 0; j < k; ++j) expected[pos++] = theta;
        for (Index i : s.complement()) expected[pos++] = l[i];
        expected = sorted_desc(expected);
        const Vector got = sorted_desc(es.eigenvalues());
        for (Index i = 0; i < n; ++i) EXPECT_NEAR(got[i], expected[i], 1e-10 * l[0]);
    }
}

TEST(ContractionRatio, Examples) {
    // case 1 with lambda_k = 9, lambda_n = 1; complement window [1, 3]
    const Vector l{{1000.0, 9.0, 3.0, 2.0, 1.0}};
    const SpectralData s = select_index_set(l, 2);
    ASSERT_EQ(s.selection_case(), 1);
    const auto p = make_problem(std::make_shared<const DiagonalOperator>(l), Vector::Ones(5));
    const double tm = compute_theta(ThetaStrategy::mid_range(), s, p);
    EXPECT_DOUBLE_EQ(tm, 5.0);
    EXPECT_DOUBLE_EQ(contraction_ratio(tm, s), 0.8);
    EXPECT_DOUBLE_EQ(contraction_ratio(9.0, s), 8.0 / 9.0);
    EXPECT_DOUBLE_EQ(compute_theta(ThetaStrategy::range_endpoint(), s, p), 9.0);
    EXPECT_DOUBLE_EQ(compute_theta(ThetaStrategy::smallest_eigenvalue(), s, p), 1.0);
    EXPECT_DOUBLE_EQ(compute_theta(ThetaStrategy::fixed(2.5), s, p), 2.5);
    EXPECT_THROW(contraction_ratio(0.0, s), std::invalid_argument);
}

TEST(ContractionRatio, MidpointMinimisesOnGrid) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const SpectralData s = select_index_set(random_spectrum(30, 4.0, rng), 5);
        const double mid = window_midpoint(s);
        const double best = contraction_ratio(mid, s);
        const double hi = s.complement_largest;
        EXPECT_NEAR(best, (hi - s.complement_smallest) / (hi + s.complement_smallest), 1e-15);
        for (int g = 0; g <= 400; ++g) {
            const double theta = hi / 2.0 * (1.0 + 1e-9) + g * (2.0 * hi - hi / 2.0) / 400.0;
            EXPECT_LE(best, contraction_ratio(theta, s) + 1e-15);
        }
        EXPECT_TRUE(has_pessimistic_bound(hi / 2.0 * 0.99, s));
        EXPECT_FALSE(has_pessimistic_bound(mid, s));
    }
}

TEST(ComputeTheta, PracticalChoicesPerCase) {
    const auto problem_for = [](const Vector& l) {
        return make_problem(std::make_shared<const DiagonalOperator>(l), Vector::Ones(l.size()));
    };
    const Vector case2{{4.0, 3.0, 2.0, 0.002, 0.001}};
    const SpectralData s2 = select_index_set(case2, 2);
    EXPECT_DOUBLE_EQ(compute_theta(ThetaStrategy::range_endpoint(), s2, problem_for(case2)), 4.0);
    EXPECT_DOUBLE_EQ(compute_theta(ThetaStrategy::mid_range(), s2, problem_for(case2)), 0.5 * (4.0 + 0.002));

    const Vector case3{{100.0, 5.0, 4.0, 3.0, 0.01}};
    const SpectralData s3 = select_index_set(case3, 2);
    EXPECT_DOUBLE_EQ(compute_theta(ThetaStrategy::range_endpoint(), s3, problem_for(case3)), 100.0);
    EXPECT_DOUBLE_EQ(compute_theta(ThetaStrategy::mid_range(), s3, problem_for(case3)), 0.5 * (100.0 + 0.01));
}

TEST(FirstIterationTheta, HandExample) {
    const Vector l{{100.0, 10.0, 1.0}};
    const auto p = make_problem(std::make_shared<const DiagonalOperator>(l), Vector{{0.0, 1.0, 1.0}});
    const SpectralData s = make_spectral_data(l, {0});
    EXPECT_DOUBLE_EQ(compute_theta(ThetaStrategy::first_iteration_optimal(), s, p), 5.5);
}

TEST(FirstIterationTheta, ConstantSpectrumGivesTheConstant) {
    std::mt19937_64 rng(3);
    const Vector l = Vector::Constant(10, 7.0);
    const auto p = make_problem(std::make_shared<const DiagonalOperator>(l), gaussian(10, rng));
    EXPECT_NEAR(compute_theta(ThetaStrategy::first_iteration_optimal(), select_index_set(l, 3), p), 7.0, 1e-14);
}

TEST(FirstIterationTheta, DegenerateResidual) {
    const Vector l{{100.0, 10.0, 1.0}};
    const auto p = make_problem(std::make_shared<const DiagonalOperator>(l), Vector{{1.0, 0.0, 0.0}});
    EXPECT_THROW(compute_theta(ThetaStrategy::first_iteration_optimal(), make_spectral_data(l, {0}), p),
                 DegenerateResidualError);
}

TEST(FirstIterationTheta, EqualsFirstRitzValueOfReducedSystem) {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 10; ++trial) {
        const Index n = 60;
        const Vector l = random_spectrum(n, 4.0, rng);
        const auto op = std::make_shared<const DenseSpdOperator>(DenseSpdOperator::random(l, rng));
        const auto p = make_problem(op, gaussian(n, rng), gaussian(n, rng));
        const SpectralData s = select_index_set(*op, 8);
        const double theta1 = compute_theta(ThetaStrategy::first_iteration_optimal(), s, p);
        const Vector eta = residual_components(*op, p.initial_residual());
        const double ritz = ritz_values(ReducedSystem::restrict_to(l, eta, s.complement()), 1).largest(1);
        EXPECT_NEAR(theta1, ritz, 1e-12 * ritz);
    }
}

TEST(SpectralBasis, RejectsNonOrthonormalColumns) {
    Matrix c(3, 2);
    c << 1, 1, 0, 0, 0, 0;
    EXPECT_THROW(SpectralBasis::explicit_columns({0, 1}, c), std::invalid_argument);
    EXPECT_THROW(SpectralBasis::explicit_columns({0}, Matrix::Identity(3, 2)), DimensionError);
    EXPECT_THROW(make_spectral_data(Vector{{3.0, 2.0, 1.0}}, {0, 0}), std::invalid_argument);
}
