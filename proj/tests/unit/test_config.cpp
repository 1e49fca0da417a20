#include "catch_amalgamated.hpp"

#include "garchtail/config.hpp"

#include <sstream>

using namespace garchtail;
using Catch::Matchers::ContainsSubstring;

namespace {

ConfigTable parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in, "model.toml");
}

ModelFile load(const std::string& text) { return load_model(parse(text)); }

const std::string kModelA = R"(# model A
name = "A"
p = 2
q = 2
alpha0 = 1e-5
alpha = [0.3, 0.15]   # lagged X2
beta = [0.2, 0.1]

[innovation]
kind = "skew_t"
nu = 3
xi = 1

[expected]
kappa = 1.23
)";

}  // namespace

TEST_CASE("model file parses", "[config]") {
    const auto m = load(kModelA);
    CHECK(m.name == "A");
    CHECK(m.spec.p == 2);
    CHECK(m.spec.q == 2);
    CHECK(m.spec.alpha == std::vector<double>{0.3, 0.15});
    CHECK(m.spec.beta == std::vector<double>{0.2, 0.1});
    CHECK(m.spec.alpha0 == 1e-5);
    CHECK(m.spec.innovation.kind == InnovationKind::SkewT);
    CHECK(m.spec.innovation.xi == 1.0);
    CHECK(m.expected.at("kappa") == 1.23);
}

TEST_CASE("ARCH file with an empty beta array", "[config]") {
    const auto m = load("p = 0\nq = 2\nalpha0 = 1e-5\nalpha = [1.2, 0.5]\nbeta = []\n");
    CHECK(m.spec.p == 0);
    CHECK(m.spec.beta.empty());
    CHECK(m.spec.innovation.kind == InnovationKind::Gaussian);
}

TEST_CASE("config errors name the line and field", "[config][errors]") {
    auto kind_of = [](const std::string& text) {
        try {
            load(text);
        } catch (const Error& e) {
            return std::pair{e.kind(), std::string(e.what())};
        }
        return std::pair{ErrorKind::Convergence, std::string("no error")};
    };
    const std::string base = "p = 1\nq = 1\nalpha0 = 1e-5\nalpha = [0.1]\nbeta = [0.8]\n";

    auto [k1, w1] = kind_of(base + "gamma = 3\n");
    CHECK(k1 == ErrorKind::Config);
    CHECK_THAT(w1, ContainsSubstring("model.toml:6") && ContainsSubstring("gamma"));

    auto [k2, w2] = kind_of("p = 1\nq = 1\nalpha0 = abc\nalpha = [0.1]\nbeta = [0.8]\n");
    CHECK(k2 == ErrorKind::Config);
    CHECK_THAT(w2, ContainsSubstring("model.toml:3"));

    auto [k3, w3] = kind_of("p = 1\nq = 1\nalpha = [0.1]\nbeta = [0.8]\n");
    CHECK(k3 == ErrorKind::Config);
    CHECK_THAT(w3, ContainsSubstring("alpha0"));

    auto [k4, w4] = kind_of(base + "[innovation]\nkind = \"scaled_t\"\nnu = 2\n");
    CHECK(k4 == ErrorKind::InvalidDof);
    CHECK_THAT(w4, ContainsSubstring("model.toml:7"));

    auto [k5, w5] = kind_of("p = 2\nq = 1\nalpha0 = 1e-5\nalpha = [0.1]\nbeta = [0.8]\n");
    CHECK(k5 == ErrorKind::Dimension);

    auto [k6, w6] = kind_of(base + "p = 2\n");
    CHECK(k6 == ErrorKind::Config);
    CHECK_THAT(w6, ContainsSubstring("duplicate"));

    auto [k7, w7] = kind_of(base + "alpha_x [0.1]\n");
    CHECK(k7 == ErrorKind::Config);
    CHECK_THAT(w7, ContainsSubstring("model.toml:6"));

    auto [k8, w8] = kind_of("p = 1.5\nq = 1\nalpha0 = 1e-5\nalpha = [0.1]\nbeta = [0.8]\n");
    CHECK(k8 == ErrorKind::Config);
    CHECK_THAT(w8, ContainsSubstring("integer"));

    CHECK(exit_code(k1) == 2);
    CHECK(exit_code(k4) == 2);
    CHECK(exit_code(k5) == 2);
}

TEST_CASE("shipped fixtures load", "[config][fixtures]") {
    for (const char* m : {"A", "B", "C", "D", "E"}) {
        for (const char* inn : {"t3", "skewt3", "gaussian"}) {
            const auto path = std::string(GARCHTAIL_FIXTURES) + "/model" + m + "_" + inn + ".toml";
            const auto f = load_model_file(path);
            CHECK(f.expected.size() == 7);
            CHECK(f.name == std::string("model") + m + "_" + inn);
        }
    }
    const auto c = load_model_file(std::string(GARCHTAIL_FIXTURES) + "/modelC_gaussian.toml");
    CHECK(c.spec.is_igarch());
    CHECK_THROWS_AS(load_model_file("no/such/file.toml"), Error);
}
