#include <doctest.h>

#include <string>

#include "anc/config.hpp"
#include "anc/error.hpp"

using namespace anc;

TEST_SUITE("config") {
  TEST_CASE("defaults and source tags") {
    config::RunConfig c;
    CHECK(c.count("decompose.num_bands") == 15);
    CHECK(c.count("pretrain.num_taps") == 1024);
    CHECK(c.sample_rate_hz() == 16000);
    const auto snap = c.snapshot();
    CHECK(snap["decompose.num_bands"]["source"] == "paper");
    CHECK(snap["train.learning_rate"]["source"] == "paper_unspecified");
    CHECK(c.architecture().descriptor() == nn::CnnArchitecture::standard().descriptor());
  }

  TEST_CASE("unknown keys and bad values are rejected") {
    config::RunConfig c;
    CHECK_THROWS_AS(c.set("no.such.key", "1"), InvalidArgument);
    CHECK_THROWS_AS(c.set("train.epochs", "ten"), InvalidArgument);
    CHECK_THROWS_AS(c.set("train.epochs", "-1"), InvalidArgument);
    CHECK_THROWS_AS(c.set("train.mode", "semi"), InvalidArgument);
    CHECK_THROWS_AS(c.set("eval.algos", "unsup,lms"), InvalidArgument);
    CHECK_THROWS_AS(c.set("pretrain.normalized", "maybe"), InvalidArgument);
    c.set("train.epochs", "3");
    CHECK(c.train_config().epochs == 3);
  }

  TEST_CASE("config text round trip and error locations") {
    config::RunConfig c;
    c.load_text("# comment\ntrain.epochs = 4\ndecompose.spacing=log\n", "a.cfg");
    CHECK(c.count("train.epochs") == 4);
    config::RunConfig d;
    d.load_text(c.to_text());
    CHECK(d.snapshot() == c.snapshot());
    try {
      d.load_text("train.epochs=1\nbogus=2\n", "b.cfg");
      FAIL("expected an error");
    } catch (const InvalidArgument& e) {
      CHECK(std::string(e.what()).find("b.cfg:2") != std::string::npos);
    }
  }

  TEST_CASE("help text lists keys with their source") {
    const auto help = config::describe_keys();
    CHECK(help.find("decompose.num_bands") != std::string::npos);
    CHECK(help.find("source: paper") != std::string::npos);
  }
}
