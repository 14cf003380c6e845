#include <gtest/gtest.h>

#include <random>

#include "builders.hpp"
#include "clickprep/identity.hpp"

using namespace clickprep;
using namespace clickprep::testing;

namespace {

Event raw(std::string id, std::optional<std::string> cookie, std::optional<std::string> user, std::int64_t t) {
  Event e = click(std::move(id), "", t, "p");
  e.cust_id.reset();
  e.cookie_id = std::move(cookie);
  e.user_id = std::move(user);
  return e;
}

std::map<std::string, std::string> cust_by_event(const EventLog& log) {
  std::map<std::string, std::string> out;
  for (const auto& e : log) out[e.event_id] = e.cust_id.value_or("<none>");
  return out;
}

}  // namespace

TEST(Identity, RecordWithoutIdsIsDropped) {
  auto r = resolve(EventLog({raw("a", std::nullopt, std::nullopt, kT0), raw("b", "c1", std::nullopt, kT0)}));
  EXPECT_EQ(r.log.size(), 1u);
  EXPECT_EQ(r.report.eliminated_no_ids, 1u);
}

TEST(Identity, AmbiguousCookieRecordIsDropped) {
  auto r = resolve(EventLog({raw("a", "shared", "u1", kT0), raw("b", "shared", "u2", kT0 + 1),
                             raw("c", "shared", std::nullopt, kT0 + 2)}));
  const auto ids = cust_by_event(r.log);
  EXPECT_FALSE(ids.count("c"));
  EXPECT_EQ(ids.at("a"), "u1");
  EXPECT_EQ(ids.at("b"), "u2");
  EXPECT_EQ(r.report.eliminated_ambiguous, 1u);
}

TEST(Identity, UserIdWins) {
  auto r = resolve(EventLog({raw("a", "c1", "u1", kT0), raw("b", std::nullopt, "u9", kT0 + 1)}));
  const auto ids = cust_by_event(r.log);
  EXPECT_EQ(ids.at("a"), "u1");
  EXPECT_EQ(ids.at("b"), "u9");
}

TEST(Identity, CookieBackfilledFromSingleUser) {
  // The anonymous record comes first; the mapping is global over the log.
  auto r = resolve(EventLog({raw("a", "c1", std::nullopt, kT0), raw("b", "c1", "u1", kT0 + 1)}));
  EXPECT_EQ(cust_by_event(r.log).at("a"), "u1");
  EXPECT_EQ(r.report.backfilled_from_map, 1u);
}

TEST(Identity, UnmappedCookieBecomesCustomer) {
  auto r = resolve(EventLog({raw("a", "c7", std::nullopt, kT0)}));
  EXPECT_EQ(cust_by_event(r.log).at("a"), "c7");
  EXPECT_EQ(r.report.cookie_only, 1u);
}

TEST(IdentityMap, MergeIsAssociativeAndCommutative) {
  std::mt19937 rng(11);
  auto random_map = [&] {
    IdentityMap m;
    for (int i = 0; i < 30; ++i) m.add("c" + std::to_string(rng() % 10), "u" + std::to_string(rng() % 6));
    return m;
  };
  for (int trial = 0; trial < 25; ++trial) {
    const auto a = random_map(), b = random_map(), c = random_map();
    IdentityMap ab = a;
    ab.merge(b);
    IdentityMap ba = b;
    ba.merge(a);
    EXPECT_EQ(ab, ba);
    IdentityMap ab_c = ab;
    ab_c.merge(c);
    IdentityMap bc = b;
    bc.merge(c);
    IdentityMap a_bc = a;
    a_bc.merge(bc);
    EXPECT_EQ(ab_c, a_bc);
  }
}

TEST(IdentityMap, ChunkedBuildEqualsWholeBuild) {
  std::mt19937 rng(5);
  std::vector<Event> events;
  for (int i = 0; i < 400; ++i) {
    std::optional<std::string> user;
    if (rng() % 3 == 0) user = "u" + std::to_string(rng() % 20);
    events.push_back(raw("e" + std::to_string(i), "c" + std::to_string(rng() % 40), user, kT0 + i));
  }
  const EventLog log(events);
  IdentityMap merged;
  for (std::size_t start = 0; start < events.size(); start += 37) {
    std::vector<Event> part(events.begin() + start, events.begin() + std::min(events.size(), start + 37));
    merged.merge(build_identity_map(EventLog(part)));
  }
  EXPECT_EQ(merged, build_identity_map(log));
}

TEST(Identity, ResolutionIsIdempotentAndKeepsEveryResolvableRecord) {
  std::mt19937 rng(8);
  std::vector<Event> events;
  for (int i = 0; i < 500; ++i) {
    std::optional<std::string> cookie, user;
    if (rng() % 10) cookie = "c" + std::to_string(rng() % 60);
    if (rng() % 4 == 0) user = "u" + std::to_string(rng() % 25);
    events.push_back(raw("e" + std::to_string(i), cookie, user, kT0 + i));
  }
  const auto once = resolve(EventLog(events));
  const auto& rep = once.report;
  EXPECT_EQ(rep.input_events, once.log.size() + rep.eliminated_no_ids + rep.eliminated_ambiguous);
  for (const auto& e : once.log) ASSERT_TRUE(e.cust_id.has_value());
  const auto twice = resolve(once.log);
  EXPECT_EQ(cust_by_event(once.log), cust_by_event(twice.log));
}
