#include <string>

#include "doctest.h"
#include "greedytrap/experiments.hpp"
#include "greedytrap/instance_io.hpp"

using namespace greedytrap;
using nlohmann::json;

namespace {

std::string fixture(const std::string& name) { return std::string(GREEDYTRAP_FIXTURE_DIR) + "/" + name; }

std::string pointer_of(const std::string& text) {
  try {
    parse_instance_text(text);
  } catch (const SchemaError& e) {
    return e.pointer;
  }
  return "<no error>";
}

}  // namespace

TEST_SUITE("instance_io") {

TEST_CASE("fixtures load and round-trip") {
  for (const char* name : {"mab_failure.json", "cb_failure.json", "mab_success.json", "cb_success.json",
                           "singleton.json", "grid_mab.json", "continuum_failure.json", "continuum_success.json",
                           "dmso_decoy.json"}) {
    CAPTURE(name);
    const auto a = load_instance(fixture(name));
    const std::string once = serialize_instance(a);
    const std::string twice = serialize_instance(parse_instance_text(once));
    CHECK(once == twice);
    CHECK(json::parse(once)["schema_version"] == kSchemaVersion);
  }
}

TEST_CASE("finite round-trip preserves the data model") {
  const auto f = fixture_cb_failure();
  auto file = finite_file(f.instance);
  CHECK(file.kind == InstanceKind::Cb);
  const auto back = parse_instance_text(serialize_instance(file));
  REQUIRE(back.finite);
  const auto& i = *back.finite;
  CHECK(i.function_class().members() == f.instance.function_class().members());
  CHECK(i.sigma() == f.instance.sigma());
  CHECK(i.context_probs() == f.instance.context_probs());
  CHECK(i.warmup() == f.instance.warmup());
  CHECK(i.decoy_hint == f.instance.decoy_hint);
}

TEST_CASE("grid values stay exact") {
  const auto file = load_instance(fixture("grid_mab.json"));
  REQUIRE(file.finite);
  CHECK(file.finite->truth()(0, 2) == 9 * 0.1);
  const auto doc = instance_to_json(file);
  CHECK(doc["class"][0][2]["numerator"] == 9);
}

TEST_CASE("continuum round-trip") {
  const auto c = fixture_continuum_failure();
  const auto back = parse_instance_text(serialize_instance(continuum_file(c)));
  REQUIRE(back.continuum);
  CHECK(back.continuum->truth == c.truth);
  CHECK(back.continuum->eps == c.eps);
  CHECK(back.continuum->sigma == c.sigma);
  REQUIRE(back.continuum->decoy);
  CHECK(back.continuum->decoy->decoy == c.decoy->decoy);
}

TEST_CASE("schema errors carry JSON pointers") {
  const std::string base = R"({"schema_version":1,"kind":"mab","arms":2,"sigma":0.1,"class":[[0.5,0.9],[0.5,0.3]],"true_index":0,"warmup":1})";
  CHECK(pointer_of(base) == "<no error>");

  auto doc = json::parse(base);
  doc["class"][1] = json::array({0.5});
  CHECK(pointer_of(doc.dump()) == "/class/1");

  doc = json::parse(base);
  doc["schema_version"] = 2;
  CHECK(pointer_of(doc.dump()) == "/schema_version");

  doc = json::parse(base);
  doc["true_index"] = 5;
  CHECK(pointer_of(doc.dump()) == "/true_index");

  doc = json::parse(base);
  doc.erase("sigma");
  CHECK(pointer_of(doc.dump()) == "/sigma");

  doc = json::parse(base);
  doc["kind"] = "cb";
  doc["contexts"] = 1;
  doc["context_probs"] = json::array({0.9});
  doc["class"] = json::array({json::array({json::array({0.5, 0.9})})});
  CHECK(pointer_of(doc.dump()) == "/context_probs");

  CHECK(pointer_of("{not json") == "");
}

TEST_CASE("dmso documents") {
  const auto file = load_instance(fixture("dmso_decoy.json"));
  REQUIRE(file.models);
  CHECK(file.kind == InstanceKind::Dmso);
  CHECK(file.models->policies() == 2);
  CHECK(file.n0 == 4);
  CHECK(file.decoy_hint == 1);
}

}  // TEST_SUITE
