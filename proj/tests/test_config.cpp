#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "drnet/config.hpp"

using namespace drnet;

TEST_CASE("empty config keeps the published defaults") {
    const RunConfig cfg = parse_config_text("", "<empty>");
    CHECK(cfg.train.lr == 1e-4);
    CHECK(cfg.train.batch == 32);
    CHECK(cfg.train.epochs == 40);
    CHECK(cfg.train.frames == 256);
    CHECK(cfg.train.clip_step == 10);
    CHECK(cfg.train.gamma == 2);
    CHECK(cfg.train.rho == 0.5);
    CHECK(cfg.train.band_lo == 0.6);
    CHECK(cfg.train.band_hi == 3.0);
    CHECK(cfg.train.fs == 30.0);
    CHECK(cfg.synth.n == 32);
    RunConfig f = cfg;
    CHECK_NOTHROW(f.finalize());
    CHECK(f.model.rows == 32);
    CHECK(f.model.frames == 256);
}

TEST_CASE("values parse and comments are ignored") {
    const RunConfig cfg = parse_config_text("# comment\nrho=0.5\n\nlr=0.001\nT=128\nblock_widths=16,32\n", "<test>");
    CHECK(cfg.train.rho == 0.5);
    CHECK(cfg.train.lr == 0.001);
    CHECK(cfg.train.frames == 128);
    REQUIRE(cfg.model.block_widths.size() == 2);
    CHECK(cfg.model.block_widths[1] == 32);
}

TEST_CASE("rho outside [0,1] is rejected with location") {
    try {
        parse_config_text("rho=2\n", "cfg");
        FAIL("expected validation error");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("rho") != std::string::npos);
        CHECK(msg.find("cfg:1") != std::string::npos);
    }
}

TEST_CASE("unknown keys and malformed values carry the key name") {
    CHECK_THROWS_AS(parse_config_text("bogus=1\n", "cfg"), std::invalid_argument);
    try {
        parse_config_text("epochs=ten\n", "cfg");
        FAIL("expected type error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("epochs") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config_text("no_equals_here\n", "cfg"), std::invalid_argument);
}

TEST_CASE("finalize propagates shared fields and validates") {
    RunConfig cfg = parse_config_text("T=64\nn=8\ngamma=3\nstem_width=4\nblock_widths=8\n", "<t>");
    cfg.finalize();
    CHECK(cfg.model.frames == 64);
    CHECK(cfg.model.rows == 8);
    CHECK(cfg.synth.gamma == 3);
    RunConfig bad = parse_config_text("T=60\n", "<t>");  // not divisible by 8
    CHECK_THROWS_AS(bad.finalize(), std::invalid_argument);
}

TEST_CASE("to_text round-trips through the parser") {
    RunConfig cfg = parse_config_text("lr=0.002\nT=128\nnoise_sigma=0.25\ncolor_order=yuv\n", "<t>");
    const RunConfig back = parse_config_text(cfg.to_text(), "<roundtrip>");
    CHECK(back.train.lr == cfg.train.lr);
    CHECK(back.train.frames == cfg.train.frames);
    CHECK(back.synth.noise_sigma == cfg.synth.noise_sigma);
    CHECK(back.color_order == ChannelOrder::Yuv);
}
