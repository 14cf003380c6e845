#include "clickprep/identity.hpp"

namespace clickprep {

void IdentityMap::add(const std::string& cookie, const std::string& user) {
  if (cookie.empty() || user.empty()) return;
  map_[cookie].insert(user);
}

void IdentityMap::merge(const IdentityMap& other) {
  for (const auto& [cookie, users] : other.map_) map_[cookie].insert(users.begin(), users.end());
}

const std::set<std::string>* IdentityMap::users_for(const std::string& cookie) const {
  auto it = map_.find(cookie);
  return it == map_.end() ? nullptr : &it->second;
}

std::size_t IdentityMap::multi_user_cookies() const {
  std::size_t n = 0;
  for (const auto& [cookie, users] : map_)
    if (users.size() > 1) ++n;
  return n;
}

Json IdentityReport::to_json() const {
  return {{"input_events", input_events},
          {"eliminated_no_ids", eliminated_no_ids},
          {"eliminated_ambiguous", eliminated_ambiguous},
          {"backfilled_from_map", backfilled_from_map},
          {"cookie_only", cookie_only},
          {"distinct_cookies", distinct_cookies},
          {"multi_user_cookie_fraction", multi_user_cookie_fraction}};
}

IdentityMap build_identity_map(const EventLog& log) {
  IdentityMap map;
  for (const auto& e : log)
    if (e.cookie_id && e.user_id) map.add(*e.cookie_id, *e.user_id);
  return map;
}

IdentityResult resolve(const EventLog& log, const IdentityMap& map) {
  IdentityReport report;
  report.input_events = log.size();
  std::set<std::string> cookies;
  std::vector<Event> out;
  out.reserve(log.size());

  for (const auto& e : log) {
    if (e.cookie_id) cookies.insert(*e.cookie_id);
    if (!e.cookie_id && !e.user_id) {
      ++report.eliminated_no_ids;
      continue;
    }
    const auto* users = e.cookie_id ? map.users_for(*e.cookie_id) : nullptr;
    if (!e.user_id && users && users->size() > 1) {
      ++report.eliminated_ambiguous;
      continue;
    }
    Event r = e;
    if (e.user_id) {
      r.cust_id = e.user_id;
    } else if (users) {
      r.cust_id = *users->begin();
      ++report.backfilled_from_map;
    } else {
      r.cust_id = e.cookie_id;
      ++report.cookie_only;
    }
    out.push_back(std::move(r));
  }

  report.distinct_cookies = cookies.size();
  std::size_t multi = 0;
  for (const auto& c : cookies)
    if (const auto* users = map.users_for(c); users && users->size() > 1) ++multi;
  report.multi_user_cookie_fraction = cookies.empty() ? 0.0 : static_cast<double>(multi) / cookies.size();
  return {log.with_events(std::move(out)), report};
}

IdentityResult resolve(const EventLog& log) { return resolve(log, build_identity_map(log)); }

}  // namespace clickprep
