#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "skgc/checkpoint.hpp"
#include "skgc/config.hpp"
#include "skgc/trainer.hpp"
#include "toy.hpp"

using namespace skgc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("skgc_ckpt_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("config parsing and overrides") {
  Config c = Config::parse("# comment\n model.K = 16 \n\ntrain.lr=0.01\nflag = true\nname = two words\n");
  CHECK(c.get_int("model.K") == 16);
  CHECK(c.get_double("train.lr") == 0.01);
  CHECK(c.get_bool("flag"));
  CHECK(c.get_string("name") == "two words");
  CHECK_FALSE(c.find("missing").has_value());
  c.apply_override("model.K=64");
  CHECK(c.get_int("model.K") == 64);
  CHECK_THROWS_AS(c.apply_override("novalue"), ConfigError);
  CHECK_THROWS_AS(c.get_string("missing"), ConfigError);
  CHECK_THROWS_AS(c.get_double("name"), ConfigError);
  CHECK_THROWS_AS(c.get_int("train.lr"), ConfigError);
  CHECK_THROWS_AS(c.get_bool("model.K"), ConfigError);
  CHECK_THROWS_AS(Config::parse("just text\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse(" = 3\n"), ConfigError);
  CHECK(Config::parse(c.serialize()).values() == c.values());

  const fs::path dir = scratch("cfg");
  c.save(dir / "x.cfg");
  CHECK(Config::load(dir / "x.cfg").values() == c.values());
  CHECK_THROWS_AS(Config::load(dir / "nope.cfg"), ConfigError);
}

TEST_CASE("shipped configs parse and validate") {
  for (const char* name : {"umls.cfg", "wn18rr.cfg", "fb15k237.cfg"}) {
    INFO(name);
    const auto cfg = TrainConfig::from_config(Config::load(fs::path(SKGC_SOURCE_DIR) / "configs" / name));
    CHECK_NOTHROW(cfg.validate());
    CHECK_FALSE(cfg.data_path.empty());
  }
}

TEST_CASE("checkpoint round trip") {
  const auto kg = testutil::toy_kg();
  const auto cfg = testutil::toy_config();
  auto model = make_model(kg, cfg);
  const fs::path dir = scratch("rt");
  const auto data = snapshot(model->params(), cfg.to_config().serialize(), "{\"epoch\": 3}");
  write_checkpoint(dir / "m.ckpt", data);
  CHECK_FALSE(fs::exists(dir / "m.ckpt.tmp"));
  const auto back = read_checkpoint(dir / "m.ckpt");
  CHECK(back.config_text == data.config_text);
  CHECK(back.info_json == data.info_json);
  REQUIRE(back.sections.size() == data.sections.size());
  for (std::size_t i = 0; i < back.sections.size(); ++i) {
    CHECK(back.sections[i].first == data.sections[i].first);
    CHECK(back.sections[i].second == data.sections[i].second);
  }

  // Restoring into a fresh model with another seed reproduces the parameters.
  auto other_cfg = cfg;
  other_cfg.seed = 99;
  auto other = make_model(kg, other_cfg);
  CHECK(other->params().all().front()->value != model->params().all().front()->value);
  restore(back, other->params());
  for (std::size_t i = 0; i < model->params().size(); ++i)
    CHECK(other->params().all()[i]->value == model->params().all()[i]->value);

  // A model with another shape is rejected.
  auto wide = cfg;
  wide.model.truncation.K = 5;
  auto mismatched = make_model(kg, wide);
  CHECK_THROWS_WITH_AS(restore(back, mismatched->params()), doctest::Contains("checkpoint/config mismatch"),
                       CheckpointError);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const fs::path dir = scratch("bad");
  std::ofstream(dir / "magic.ckpt") << "NOTACKPT and some bytes";
  CHECK_THROWS_WITH_AS(read_checkpoint(dir / "magic.ckpt"), doctest::Contains("corrupt checkpoint"), CheckpointError);
  CHECK_THROWS_AS(read_checkpoint(dir / "missing.ckpt"), CheckpointError);

  const auto kg = testutil::toy_kg();
  const auto cfg = testutil::toy_config();
  auto model = make_model(kg, cfg);
  write_checkpoint(dir / "ok.ckpt", snapshot(model->params(), cfg.to_config().serialize(), "{}"));
  const auto size = fs::file_size(dir / "ok.ckpt");
  fs::copy_file(dir / "ok.ckpt", dir / "short.ckpt");
  fs::resize_file(dir / "short.ckpt", size / 2);
  CHECK_THROWS_WITH_AS(read_checkpoint(dir / "short.ckpt"), doctest::Contains("corrupt checkpoint"), CheckpointError);

  // Wrong version number.
  fs::copy_file(dir / "ok.ckpt", dir / "version.ckpt");
  {
    std::fstream f(dir / "version.ckpt", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8);
    const char v[4] = {9, 0, 0, 0};
    f.write(v, 4);
  }
  CHECK_THROWS_WITH_AS(read_checkpoint(dir / "version.ckpt"), doctest::Contains("unsupported checkpoint version"), CheckpointError);
}

TEST_CASE("save_model and load_model") {
  const fs::path dir = scratch("load");
  auto kg = testutil::toy_kg();
  save_dataset(kg, dir / "data");
  kg = load_dataset(dir / "data");
  auto cfg = testutil::toy_config();
  cfg.data_path = (dir / "data").string();
  auto model = make_model(kg, cfg);
  save_model(dir / "m.ckpt", *model, cfg, 2, 0.5);
  const auto loaded = load_model(dir / "m.ckpt");
  CHECK(loaded.config.to_config().serialize() == cfg.to_config().serialize());
  const FilterIndex f(kg);
  const auto a = evaluate(*model, kg, Split::test, f);
  const auto b = evaluate(*loaded.model, *loaded.kg, Split::test, FilterIndex(*loaded.kg));
  CHECK(report_json(a) == report_json(b));
  CHECK_THROWS(load_model(dir / "m.ckpt", (dir / "absent").string()));
}
