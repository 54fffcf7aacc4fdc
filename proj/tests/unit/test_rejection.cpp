#include "../support/doctest_torch.hpp"

#include <array>
#include <filesystem>
#include <fstream>
#include <random>

#include "tryon/fields.hpp"
#include "tryon/rejection.hpp"

using namespace tryon;

TEST_SUITE("rejection") {
    TEST_CASE("rejection input layout") {
        torch::manual_seed(0);
        const auto seg = torch::softmax(torch::randn({2, 7, 8, 6}), 1);
        const auto pose = torch::randn({2, 3, 8, 6});
        const auto sa = torch::softmax(torch::randn({2, 7, 8, 6}), 1);
        const auto c = torch::randn({2, 3, 8, 6});
        const auto cm = torch::rand({2, 1, 8, 6});
        const auto x = build_rejection_input(seg, pose, sa, c, cm);
        CHECK(x.size(1) == 7 + 3 + 7 + 3 + 1);
        CHECK(torch::equal(x, build_rejection_input(seg, pose, sa, c, cm)));
        CHECK(torch::equal(x.narrow(1, 0, 7), seg));
        CHECK(torch::equal(x.narrow(1, 7, 3), pose));
        CHECK(torch::equal(x.narrow(1, 10, 7), sa));
        CHECK(torch::equal(x.narrow(1, 17, 3), c));
        CHECK(torch::equal(x.narrow(1, 20, 1), cm));
        CHECK_FALSE(torch::equal(x, build_rejection_input(sa, pose, seg, c, cm)));
        CHECK_THROWS_AS(build_rejection_input(seg, pose, sa, c, torch::rand({2, 1, 4, 6})), ContractError);
    }

    TEST_CASE("d_scalar") {
        CHECK((d_scalar({torch::full({1, 1, 4, 4}, 0.5), torch::full({1, 1, 2, 2}, 0.5)})[0] == 0.5));
        CHECK((d_scalar({torch::full({1, 1, 4, 4}, 1.0)})[0] == 1 - kDefaultRejectionEpsilon));
        CHECK((d_scalar({torch::full({1, 1, 4, 4}, -3.0)})[0] == kDefaultRejectionEpsilon));
        CHECK(d_scalar({torch::full({1, 1, 4, 4}, 0.2), torch::full({1, 1, 2, 2}, 0.6)})[0] ==
              doctest::Approx(0.4).epsilon(1e-7));
        auto a = torch::zeros({2, 1, 3, 3});
        a[0].fill_(0.1);
        a[1].fill_(0.7);
        const auto d = d_scalar({a});
        REQUIRE(d.size() == 2);
        CHECK(d[0] == doctest::Approx(0.1));
        CHECK(d[1] == doctest::Approx(0.7));
    }

    TEST_CASE("estimate_L examples") {
        CHECK((estimate_L({0.2, 0.5, 0.8}).L == doctest::Approx(4).epsilon(1e-12)));
        CHECK((estimate_L({0.5, 0.5, 0.5}).L == 1));
        CHECK((estimate_L({0.9}).L == doctest::Approx(9).epsilon(1e-12)));
        CHECK_THROWS_AS(estimate_L({}), CalibrationError);
        const auto cal = estimate_L({0.3, 0.1});
        CHECK(cal.L > 0);
        CHECK(cal.L < 1);
        CHECK(cal.scores.size() == 2);
        // Scores at 1 are clamped so L stays finite.
        CHECK((std::isfinite(estimate_L({1.0}).L)));
    }

    TEST_CASE("p_accept and gate examples") {
        RejectionCalibration one;
        one.L = 1;
        CHECK(p_accept(0.5, one) == 1.0);
        RejectionCalibration four;
        four.L = 4;
        CHECK(p_accept(0.8, four) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(p_accept(0.2, four) == doctest::Approx(0.0625).epsilon(1e-12));

        four.threshold = 0;
        CHECK(gate(1e-6, four).accept);
        four.threshold = 1;
        const auto g = gate(0.2, four);
        CHECK_FALSE(g.accept);
        CHECK(g.p == doctest::Approx(0.0625));
    }

    TEST_CASE("p_accept is monotone and saturates at L") {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(0.01, 0.99);
        std::vector<double> scores;
        for (int i = 0; i < 50; ++i) scores.push_back(u(rng));
        const auto cal = estimate_L(scores, 0.4);
        double max_p = 0;
        for (double s : scores) max_p = std::max(max_p, p_accept(s, cal));
        CHECK(max_p == doctest::Approx(1.0).epsilon(1e-12));

        double prev = -1;
        for (int i = 1; i < 1000; ++i) {
            const double d = i / 1000.0;
            const double p = p_accept(d, cal);
            CHECK(p >= prev);
            CHECK(p <= 1);
            if (d / (1 - d) >= cal.L) CHECK(p == 1);
            prev = p;
        }
        for (int i = 0; i < 200; ++i) {
            const double a = u(rng), b = u(rng);
            if (gate(std::min(a, b), cal).accept) CHECK(gate(std::max(a, b), cal).accept);
        }
    }

    TEST_CASE("psi-sampling with the optimal discriminator reproduces the data distribution") {
        const std::array<double, 4> pd{0.1, 0.2, 0.3, 0.4};
        const std::array<double, 4> pg{0.4, 0.3, 0.2, 0.1};
        std::vector<double> dvals;
        for (int k = 0; k < 4; ++k) dvals.push_back(pd[k] / (pd[k] + pg[k]));
        const auto cal = estimate_L(dvals);
        CHECK(cal.L == doctest::Approx(4.0).epsilon(1e-5));

        std::mt19937_64 rng(2024);
        std::discrete_distribution<int> proposal(pg.begin(), pg.end());
        std::uniform_real_distribution<double> psi(0.0, 1.0);
        std::array<int, 4> accepted{};
        int total = 0;
        for (int draw = 0; draw < 10000; ++draw) {
            const int k = proposal(rng);
            if (psi(rng) <= p_accept(dvals[static_cast<std::size_t>(k)], cal)) {
                ++accepted[static_cast<std::size_t>(k)];
                ++total;
            }
        }
        REQUIRE(total > 1000);
        for (int k = 0; k < 4; ++k) {
            const double freq = static_cast<double>(accepted[static_cast<std::size_t>(k)]) / total;
            const double sigma = std::sqrt(pd[k] * (1 - pd[k]) / total);
            CHECK_MESSAGE(std::abs(freq - pd[k]) <= 3 * sigma, "value " << k << " freq " << freq);
        }
    }

    TEST_CASE("threshold sweep and histogram") {
        const auto cal = estimate_L({0.2, 0.5, 0.8, 0.6});
        const auto rows = threshold_sweep(cal, {0.0, 0.1, 0.5, 1.0});
        REQUIRE(rows.size() == 4);
        CHECK(rows[0].accept_rate == 1);
        // p values: 0.0625, 0.25, 1, 0.375
        CHECK(rows[1].accept_rate == doctest::Approx(0.75));
        CHECK(rows[2].accept_rate == doctest::Approx(0.25));
        CHECK(rows[3].accept_rate == doctest::Approx(0.25));

        const auto h = score_histogram({0.0, 0.04, 0.05, 0.5, 0.999, 1.0}, 20);
        REQUIRE(h.size() == 20);
        CHECK(h[0] == 2);
        CHECK(h[1] == 1);
        CHECK(h[10] == 1);
        CHECK(h[19] == 2);
    }

    TEST_CASE("calibration file round trip and validation") {
        auto cal = estimate_L({0.25, 0.5, 0.75}, 0.45, 1e-5);
        const auto path = std::filesystem::temp_directory_path() / "tryon_unit_calibration.json";
        save_calibration(path, cal);
        const auto back = load_calibration(path);
        CHECK(back.L == cal.L);
        CHECK(back.threshold == cal.threshold);
        CHECK(back.epsilon == cal.epsilon);
        CHECK(back.scores == cal.scores);

        cal.threshold = 1.5;
        CHECK_THROWS_AS(cal.validate(), CalibrationError);
        cal.threshold = 0.5;
        cal.L = 0;
        CHECK_THROWS_AS(cal.validate(), CalibrationError);
        {
            std::ofstream(path) << R"({"version": 99, "L": 1})";
        }
        CHECK_THROWS_AS(load_calibration(path), CalibrationError);
        std::filesystem::remove(path);
    }
}
