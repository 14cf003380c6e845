#pragma once

#include <map>
#include <set>
#include <string>

#include "clickprep/event.hpp"

namespace clickprep {

/// cookie_id -> every user_id seen on a record together with that cookie.
/// Cookies never seen with a user id are absent.
class IdentityMap {
 public:
  void add(const std::string& cookie, const std::string& user);
  /// Union of two maps; associative and commutative.
  void merge(const IdentityMap& other);

  const std::set<std::string>* users_for(const std::string& cookie) const;
  const std::map<std::string, std::set<std::string>>& entries() const noexcept { return map_; }
  std::size_t multi_user_cookies() const;

  bool operator==(const IdentityMap&) const = default;

 private:
  std::map<std::string, std::set<std::string>> map_;
};

struct IdentityReport {
  std::size_t input_events = 0;
  std::size_t eliminated_no_ids = 0;
  std::size_t eliminated_ambiguous = 0;
  std::size_t backfilled_from_map = 0;
  std::size_t cookie_only = 0;
  std::size_t distinct_cookies = 0;
  double multi_user_cookie_fraction = 0.0;

  Json to_json() const;
};

struct IdentityResult {
  EventLog log;
  IdentityReport report;
};

IdentityMap build_identity_map(const EventLog& log);

/// Assigns cust_id to every record:
///   1. drop records with neither cookie nor user id;
///   2. drop user-less records whose cookie maps to two or more users;
///   3. cust_id = user_id, else the cookie's single mapped user, else cookie.
IdentityResult resolve(const EventLog& log, const IdentityMap& map);

/// build_identity_map + resolve on the same log.
IdentityResult resolve(const EventLog& log);

}  // namespace clickprep
