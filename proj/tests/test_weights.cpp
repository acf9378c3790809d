#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "drnet/io_util.hpp"
#include "drnet/rng.hpp"
#include "drnet/weights.hpp"

using namespace drnet;

namespace {

std::filesystem::path temp_file(const char* name) {
    auto dir = std::filesystem::temp_directory_path() / "drnet_weights_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("drnw round trip preserves names, shapes, f32 values") {
    Rng rng(1);
    NamedTensors tensors;
    tensors.emplace_back("ep.stem.conv.w", Tensor::randn({8, 3, 1, 3}, rng));
    tensors.emplace_back("ep.stem.conv.b", Tensor::randn({8}, rng));
    tensors.emplace_back("sab0.fc1.w", Tensor::randn({8, 2}, rng));
    const auto path = temp_file("model.drnw");
    save_drnw(path.string(), tensors);
    const auto loaded = load_drnw(path.string());
    REQUIRE(loaded.size() == tensors.size());
    for (size_t i = 0; i < tensors.size(); ++i) {
        CHECK(loaded[i].first == tensors[i].first);
        REQUIRE(loaded[i].second.shape() == tensors[i].second.shape());
        for (std::int64_t j = 0; j < tensors[i].second.numel(); ++j) {
            const double orig = tensors[i].second.data()[static_cast<size_t>(j)];
            const double got = loaded[i].second.data()[static_cast<size_t>(j)];
            CHECK(got == static_cast<double>(static_cast<float>(orig)));
        }
    }
}

TEST_CASE("drnw header layout is exact") {
    NamedTensors tensors;
    tensors.emplace_back("w", Tensor::from_data({2}, {1.0, -2.0}));
    const auto path = temp_file("tiny.drnw");
    save_drnw(path.string(), tensors);
    const std::string raw = read_text_file(path.string());
    REQUIRE(raw.size() == 4 + 4 + 4 + 2 + 1 + 1 + 4 + 8);
    CHECK(raw.substr(0, 4) == "DRNW");
    CHECK(static_cast<unsigned char>(raw[4]) == 1);   // version u32 LE
    CHECK(static_cast<unsigned char>(raw[8]) == 1);   // count u32 LE
    CHECK(static_cast<unsigned char>(raw[12]) == 1);  // name length u16 LE
    CHECK(raw[14] == 'w');
    CHECK(static_cast<unsigned char>(raw[15]) == 1);  // ndim u8
    CHECK(static_cast<unsigned char>(raw[16]) == 2);  // dim u32 LE
}

TEST_CASE("find_tensor and assign_from validate") {
    Rng rng(2);
    NamedTensors a;
    a.emplace_back("x", Tensor::randn({3}, rng));
    CHECK_THROWS_AS(find_tensor(a, "missing"), std::invalid_argument);
    NamedTensors b;
    b.emplace_back("x", Tensor::zeros({4}));
    CHECK_THROWS_AS(assign_from(b, a), std::invalid_argument);
    NamedTensors c;
    c.emplace_back("x", Tensor::zeros({3}));
    assign_from(c, a);
    for (int i = 0; i < 3; ++i) {
        CHECK(c[0].second.data()[static_cast<size_t>(i)] == a[0].second.data()[static_cast<size_t>(i)]);
    }
}

TEST_CASE("drnw load rejects bad files") {
    const auto path = temp_file("junk.drnw");
    write_text_file(path.string(), "NOTAWEIGHTFILE");
    CHECK_THROWS_AS(load_drnw(path.string()), IoError);
    CHECK_THROWS_AS(load_drnw("/nonexistent/none.drnw"), IoError);
}
