#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <vector>

#include "skewcast/model_bank.hpp"
#include "skewcast/rng.hpp"

using namespace skewcast;

namespace {

ModelProfile profile(std::string id, long long macs, double accuracy, std::string skew = "N/A") {
  ModelProfile p;
  p.id = std::move(id);
  p.kind = skew == "N/A" ? ModelKind::General : ModelKind::Compiled;
  p.skew_key = std::move(skew);
  p.params = macs + 1;
  p.macs = macs;
  p.accuracy = accuracy;
  p.network_ref = p.id;
  return p;
}

}  // namespace

TEST_CASE("profiles validate their own fields") {
  auto p = profile("ok", 100, 0.5);
  REQUIRE_NOTHROW(p.validate());
  p.id = "";
  REQUIRE_THROWS_AS(p.validate(), Error);
  p = profile("neg", 0, 0.5);
  REQUIRE_THROWS_AS(p.validate(), Error);
  p = profile("acc", 100, 1.5);
  REQUIRE_THROWS_AS(p.validate(), Error);
  // a general model must carry exactly the placeholder key
  p = profile("genkey", 100, 0.5);
  p.skew_key = "1-2";
  REQUIRE_THROWS_AS(p.validate(), Error);
  p = profile("compkey", 100, 0.5, "1-2");
  p.skew_key = "N/A";
  REQUIRE_THROWS_AS(p.validate(), Error);
}

TEST_CASE("registration rejects duplicate ids and lookup round-trips") {
  ModelBank bank;
  bank.register_model(profile("a", 100, 0.5));
  bank.register_model(profile("b", 200, 0.6));
  REQUIRE(bank.size() == 2);
  REQUIRE(bank.contains("a"));
  REQUIRE_FALSE(bank.contains("zz"));
  REQUIRE(bank.lookup("b").macs == 200);
  REQUIRE_THROWS_AS(bank.lookup("zz"), Error);
  REQUIRE_THROWS_AS(bank.register_model(profile("a", 300, 0.7)), Error);
  REQUIRE(bank.size() == 2);
}

TEST_CASE("models_for returns registration order per skew key") {
  ModelBank bank;
  bank.register_model(profile("g2", 300, 0.6));
  bank.register_model(profile("s1", 50, 0.9, "1-2"));
  bank.register_model(profile("g1", 100, 0.4));
  bank.register_model(profile("s2", 80, 0.95, "1-2"));

  const auto general = bank.models_for("N/A");
  REQUIRE(general.size() == 2);
  REQUIRE(general[0].id == "g2");
  REQUIRE(general[1].id == "g1");

  const auto skewed = bank.models_for("1-2");
  REQUIRE(skewed.size() == 2);
  REQUIRE(skewed[0].id == "s1");
  REQUIRE(skewed[1].id == "s2");

  REQUIRE(bank.models_for("9").empty());
  REQUIRE(bank.has_skew("1-2"));
  REQUIRE_FALSE(bank.has_skew("9"));
}

TEST_CASE("pareto filtering keeps the undominated frontier") {
  std::vector<ModelProfile> members{
      profile("cheap", 100, 0.5),
      profile("dominated", 200, 0.4),   // more cost, less accuracy
      profile("mid", 200, 0.7),
      profile("dup-cost", 200, 0.65),   // same cost as mid, worse accuracy
      profile("top", 400, 0.9),
      profile("wasteful", 500, 0.9),    // same accuracy as top, more cost
  };
  const auto kept = pareto_filter(members);
  REQUIRE(kept.size() == 3);
  REQUIRE(kept[0].id == "cheap");
  REQUIRE(kept[1].id == "mid");
  REQUIRE(kept[2].id == "top");
  for (std::size_t i = 1; i < kept.size(); ++i) {
    REQUIRE(kept[i].macs > kept[i - 1].macs);
    REQUIRE(kept[i].accuracy > kept[i - 1].accuracy);
  }
}

TEST_CASE("pareto filtering matches a brute-force dominance oracle") {
  HashRng rng(51, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.uniform_below(12);
    std::vector<ModelProfile> members;
    for (std::size_t i = 0; i < n; ++i) {
      members.push_back(profile("m" + std::to_string(i),
                                1 + static_cast<long long>(rng.uniform_below(20)),
                                0.1 * static_cast<double>(1 + rng.uniform_below(9))));
    }
    const auto kept = pareto_filter(members);

    std::vector<std::string> want;
    for (std::size_t i = 0; i < n; ++i) {
      bool dominated = false;
      for (std::size_t j = 0; j < n && !dominated; ++j) {
        if (j == i) continue;
        const bool no_worse = members[j].macs <= members[i].macs &&
                              members[j].accuracy >= members[i].accuracy;
        const bool strictly = members[j].macs < members[i].macs ||
                              members[j].accuracy > members[i].accuracy;
        if (no_worse && (strictly || j < i)) dominated = true;
      }
      if (!dominated) want.push_back(members[i].id);
    }
    REQUIRE(kept.size() == want.size());
    for (const auto& k : kept) {
      REQUIRE(std::find(want.begin(), want.end(), k.id) != want.end());
    }
  }
}

TEST_CASE("cascade validation demands strict monotonicity in both axes") {
  Cascade c;
  c.members = {profile("a", 100, 0.5), profile("b", 200, 0.7)};
  REQUIRE_NOTHROW(c.validate());
  REQUIRE(c.top().id == "b");

  c.members = {profile("a", 100, 0.5), profile("b", 100, 0.7)};
  REQUIRE_THROWS_AS(c.validate(), Error);
  c.members = {profile("a", 100, 0.7), profile("b", 200, 0.7)};
  REQUIRE_THROWS_AS(c.validate(), Error);
  c.members.clear();
  REQUIRE_THROWS_AS(c.validate(), Error);
  REQUIRE_THROWS_AS(c.top(), Error);
}

TEST_CASE("make_cascade filters then validates") {
  std::vector<ModelProfile> members{
      profile("big", 400, 0.9),
      profile("junk", 300, 0.2),
      profile("small", 100, 0.5),
  };
  const auto cascade = make_cascade("N/A", members);
  REQUIRE(cascade.members.size() == 2);
  REQUIRE(cascade.members[0].id == "small");
  REQUIRE(cascade.members[1].id == "big");
  REQUIRE(cascade.skew_key == "N/A");
}

TEST_CASE("cascade_for rebuilds the frontier from registered models") {
  ModelBank bank;
  bank.register_model(profile("a", 100, 0.5));
  bank.register_model(profile("bad", 150, 0.3));
  bank.register_model(profile("b", 200, 0.7));
  const auto cascade = bank.cascade_for("N/A");
  REQUIRE(cascade.has_value());
  REQUIRE(cascade->members.size() == 2);
  REQUIRE_FALSE(bank.cascade_for("1-2-3").has_value());
}
