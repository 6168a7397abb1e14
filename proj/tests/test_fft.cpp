#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "lemole/errors.hpp"
#include "lemole/fft.hpp"
#include "lemole/rng.hpp"

using namespace lemole;

namespace {

// Independent O(n^2) oracle for the unnormalized forward transform.
std::vector<cplx> naive_dft(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<cplx> out(n / 2 + 1, cplx(0.0, 0.0));
    for (std::size_t k = 0; k < out.size(); ++k) {
        double re = 0.0, im = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            const double ang = -2.0 * 3.14159265358979323846 * static_cast<double>(k) *
                               static_cast<double>(t) / static_cast<double>(n);
            re += x[t] * std::cos(ang);
            im += x[t] * std::sin(ang);
        }
        out[k] = cplx(re, im);
    }
    return out;
}

std::vector<double> random_signal(std::size_t n, Rng& rng) {
    std::vector<double> x(n);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    return x;
}

} // namespace

TEST_CASE("rfft matches the naive DFT for n in 1..32") {
    Rng rng(11);
    for (std::size_t n = 1; n <= 32; ++n) {
        const auto x = random_signal(n, rng);
        const auto fast = rfft(x);
        const auto slow = naive_dft(x);
        REQUIRE(fast.size() == slow.size());
        for (std::size_t k = 0; k < fast.size(); ++k) {
            CHECK(std::abs(fast[k] - slow[k]) < 1e-9);
        }
    }
}

TEST_CASE("irfft(rfft(x), n) round-trips for n in 1..64") {
    Rng rng(12);
    for (std::size_t n = 1; n <= 64; ++n) {
        const auto x = random_signal(n, rng);
        const auto back = irfft(rfft(x), n);
        double max_err = 0.0;
        for (std::size_t i = 0; i < n; ++i) max_err = std::max(max_err, std::fabs(back[i] - x[i]));
        CHECK(max_err < 1e-9);
    }
}

TEST_CASE("constant signal concentrates in the DC bin") {
    const std::vector<double> x = {1.0, 1.0, 1.0, 1.0};
    const auto spec = rfft(x);
    REQUIRE(spec.size() == 3);
    CHECK(std::abs(spec[0] - cplx(4.0, 0.0)) < 1e-12);
    CHECK(std::abs(spec[1]) < 1e-12);
    CHECK(std::abs(spec[2]) < 1e-12);
}

TEST_CASE("cosine at half Nyquist lands in bin 1") {
    const std::vector<double> x = {1.0, 0.0, -1.0, 0.0};
    const auto spec = rfft(x);
    REQUIRE(spec.size() == 3);
    CHECK(std::abs(spec[0]) < 1e-12);
    CHECK(std::abs(spec[1] - cplx(2.0, 0.0)) < 1e-12);
    CHECK(std::abs(spec[2]) < 1e-12);
}

TEST_CASE("odd-length round trip") {
    Rng rng(13);
    const auto x = random_signal(15, rng);
    const auto back = irfft(rfft(x), 15);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::fabs(back[i] - x[i]) < 1e-9);
}

TEST_CASE("irfft rejects a wrong bin count") {
    std::vector<cplx> spec(4, cplx(0.0, 0.0));
    CHECK_THROWS_AS(irfft(spec, 4), Error);
}

TEST_CASE("adjoints satisfy the inner-product identity") {
    // <A x, y> == <x, A^T y> over the real inner product, for both transforms.
    Rng rng(14);
    for (std::size_t n : {4u, 7u, 12u, 17u}) {
        const auto x = random_signal(n, rng);
        const std::size_t bins = n / 2 + 1;
        std::vector<cplx> y(bins);
        for (auto& v : y) v = cplx(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));

        const auto ax = rfft(x);
        double lhs = 0.0;
        for (std::size_t k = 0; k < bins; ++k)
            lhs += ax[k].real() * y[k].real() + ax[k].imag() * y[k].imag();
        const auto aty = rfft_adjoint(y, n);
        double rhs = 0.0;
        for (std::size_t i = 0; i < n; ++i) rhs += x[i] * aty[i];
        CHECK(std::fabs(lhs - rhs) < 1e-9);

        // irfft: A maps bins -> signal; zero out the imaginary parts irfft
        // ignores so both sides describe the same linear map.
        std::vector<cplx> s = y;
        s[0] = cplx(s[0].real(), 0.0);
        if (n % 2 == 0) s[bins - 1] = cplx(s[bins - 1].real(), 0.0);
        const auto as = irfft(s, n);
        const auto g = random_signal(n, rng);
        double lhs2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) lhs2 += as[i] * g[i];
        const auto atg = irfft_adjoint(g);
        double rhs2 = 0.0;
        for (std::size_t k = 0; k < bins; ++k)
            rhs2 += s[k].real() * atg[k].real() + s[k].imag() * atg[k].imag();
        CHECK(std::fabs(lhs2 - rhs2) < 1e-9);
    }
}
