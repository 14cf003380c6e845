#include "clickprep/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "clickprep/parallel.hpp"
#include "clickprep/validation.hpp"

namespace clickprep {

std::string_view to_string(CustomerLabel l) {
  switch (l) {
    case CustomerLabel::Clean: return "CLEAN";
    case CustomerLabel::Bounce: return "BOUNCE";
    case CustomerLabel::Bot: return "BOT";
    case CustomerLabel::B2B: return "B2B";
    case CustomerLabel::Outlier: return "OUTLIER";
  }
  return "CLEAN";
}

SynthConfig SynthConfig::zero_pathology() {
  SynthConfig c;
  c.bounce_fraction = 0.0;
  c.bot_count = 0;
  c.b2b_count = 0;
  c.duplicate_glitch_prob = 0.0;
  c.outlier_customers = 0;
  c.combo_catalog = 0;
  c.shared_cookie_pairs = 0;
  return c;
}

void SynthConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InfeasibleConfig, msg); };
  auto fraction = [&](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) fail(std::string(name) + " must be in [0,1]");
  };
  auto rate = [&](double v, const char* name) {
    if (!(v > 0.0 && v < 1.0)) fail(std::string(name) + " must be in (0,1)");
  };
  if (customers == 0) fail("customers must be positive");
  if (days == 0) fail("days must be positive");
  fraction(visit_prob, "visit_prob");
  fraction(bounce_fraction, "bounce_fraction");
  fraction(duplicate_glitch_prob, "duplicate_glitch_prob");
  fraction(multi_device_fraction, "multi_device_fraction");
  fraction(account_fraction, "account_fraction");
  fraction(login_prob, "login_prob");
  fraction(plp_landing_prob, "plp_landing_prob");
  rate(base_ctr, "base_ctr");
  rate(base_atctr, "base_atctr");
  rate(base_btr, "base_btr");
  if (base_atctr > base_ctr || base_btr > base_atctr) fail("rates must satisfy btr <= atctr <= ctr");
  if (!(segment_ctr_ratio > 0.0) || base_ctr * segment_ctr_ratio >= 1.0) fail("segment_ctr_ratio out of range");
  if (!(new_customer_ctr_factor > 0.0)) fail("new_customer_ctr_factor must be positive");
  if (daily_ctr_variation < 0.0) fail("daily_ctr_variation must be >= 0");
  if (views_cap < 1) fail("views_cap must be >= 1");
  if (!(gap_median_s > 0.0) || !(gap_cap_s > 0.0) || gap_sigma < 0.0) fail("gap parameters invalid");
  if (gap_cap_s * 1000.0 >= 5.0 * kMillisPerMinute) fail("gap_cap_s must stay below the click window");
  if (!(bot_clicks_per_second > 0.0) || bot_regular_gap_ms <= 0) fail("bot timing invalid");
  if (outlier_views_min < 1 || outlier_views_max < outlier_views_min) fail("outlier view range invalid");
  if (b2b_buy_multiplier < 1.0) fail("b2b_buy_multiplier must be >= 1");
  if (catalog < 50) fail("catalog must hold at least 50 products");
  if (!(price_min > 0.0) || price_max < price_min) fail("price range invalid");
  if (currencies.empty()) fail("at least one currency required");
  for (const auto& c : currencies)
    if (c.code.size() != 3 || !(c.rate > 0.0) || !(c.weight >= 0.0)) fail("currency entry invalid: " + c.code);

  const auto bounces = static_cast<std::size_t>(std::llround(bounce_fraction * static_cast<double>(customers)));
  const std::size_t special = bounces + bot_count + b2b_count + outlier_customers + 2 * shared_cookie_pairs;
  if (special > customers)
    fail("bounce, bot, B2B, outlier and shared-cookie customers exceed the population (" + std::to_string(special) +
         " > " + std::to_string(customers) + ")");
}

Json SynthConfig::to_json() const {
  Json cur = Json::array();
  for (const auto& c : currencies) cur.push_back({{"code", c.code}, {"rate", c.rate}, {"weight", c.weight}});
  return {{"customers", customers},
          {"days", days},
          {"start_ms", start_ms},
          {"seed", seed},
          {"visit_prob", visit_prob},
          {"views_log_mu", views_log_mu},
          {"views_log_sigma", views_log_sigma},
          {"views_cap", views_cap},
          {"gap_median_s", gap_median_s},
          {"gap_sigma", gap_sigma},
          {"gap_cap_s", gap_cap_s},
          {"base_ctr", base_ctr},
          {"base_atctr", base_atctr},
          {"base_btr", base_btr},
          {"daily_ctr_variation", daily_ctr_variation},
          {"segment_ctr_ratio", segment_ctr_ratio},
          {"new_customer_ramp_clicks", new_customer_ramp_clicks},
          {"new_customer_ctr_factor", new_customer_ctr_factor},
          {"plp_landing_prob", plp_landing_prob},
          {"account_fraction", account_fraction},
          {"login_prob", login_prob},
          {"bounce_fraction", bounce_fraction},
          {"bot_count", bot_count},
          {"bot_clicks_per_second", bot_clicks_per_second},
          {"bot_regular_gap_ms", bot_regular_gap_ms},
          {"b2b_count", b2b_count},
          {"b2b_buy_multiplier", b2b_buy_multiplier},
          {"duplicate_glitch_prob", duplicate_glitch_prob},
          {"outlier_customers", outlier_customers},
          {"outlier_views_min", outlier_views_min},
          {"outlier_views_max", outlier_views_max},
          {"combo_catalog", combo_catalog},
          {"multi_device_fraction", multi_device_fraction},
          {"shared_cookie_pairs", shared_cookie_pairs},
          {"catalog", catalog},
          {"price_min", price_min},
          {"price_max", price_max},
          {"base_currency", base_currency},
          {"currencies", cur}};
}

SynthConfig SynthConfig::from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigInvalid, "synth config must be a JSON object");
  SynthConfig c;
  const Json known = c.to_json();
  try {
    for (const auto& [key, value] : j.items())
      if (!known.contains(key)) throw Error(ErrorCode::ConfigInvalid, "unknown synth config field '" + key + "'");
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("customers", c.customers);
    get("days", c.days);
    get("start_ms", c.start_ms);
    get("seed", c.seed);
    get("visit_prob", c.visit_prob);
    get("views_log_mu", c.views_log_mu);
    get("views_log_sigma", c.views_log_sigma);
    get("views_cap", c.views_cap);
    get("gap_median_s", c.gap_median_s);
    get("gap_sigma", c.gap_sigma);
    get("gap_cap_s", c.gap_cap_s);
    get("base_ctr", c.base_ctr);
    get("base_atctr", c.base_atctr);
    get("base_btr", c.base_btr);
    get("daily_ctr_variation", c.daily_ctr_variation);
    get("segment_ctr_ratio", c.segment_ctr_ratio);
    get("new_customer_ramp_clicks", c.new_customer_ramp_clicks);
    get("new_customer_ctr_factor", c.new_customer_ctr_factor);
    get("plp_landing_prob", c.plp_landing_prob);
    get("account_fraction", c.account_fraction);
    get("login_prob", c.login_prob);
    get("bounce_fraction", c.bounce_fraction);
    get("bot_count", c.bot_count);
    get("bot_clicks_per_second", c.bot_clicks_per_second);
    get("bot_regular_gap_ms", c.bot_regular_gap_ms);
    get("b2b_count", c.b2b_count);
    get("b2b_buy_multiplier", c.b2b_buy_multiplier);
    get("duplicate_glitch_prob", c.duplicate_glitch_prob);
    get("outlier_customers", c.outlier_customers);
    get("outlier_views_min", c.outlier_views_min);
    get("outlier_views_max", c.outlier_views_max);
    get("combo_catalog", c.combo_catalog);
    get("multi_device_fraction", c.multi_device_fraction);
    get("shared_cookie_pairs", c.shared_cookie_pairs);
    get("catalog", c.catalog);
    get("price_min", c.price_min);
    get("price_max", c.price_max);
    get("base_currency", c.base_currency);
    if (j.contains("currencies")) {
      c.currencies.clear();
      for (const auto& cur : j.at("currencies"))
        c.currencies.push_back({cur.at("code").get<std::string>(), cur.value("rate", 1.0), cur.value("weight", 1.0)});
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::ConfigInvalid, std::string("synth config: ") + ex.what());
  }
  return c;
}

std::set<std::string> GroundTruth::canonical_ids(CustomerLabel label) const {
  std::set<std::string> out;
  for (const auto& [id, c] : customers)
    if (c.label == label) out.insert(c.canonical_id());
  return out;
}

Json GroundTruth::to_json() const {
  Json people = Json::object();
  for (const auto& [id, c] : customers) {
    Json p = {{"label", to_string(c.label)},
              {"cookies", c.cookies},
              {"segment", to_string(c.segment)},
              {"canonical_id", c.canonical_id()}};
    p["user_id"] = c.user_id ? Json(*c.user_id) : Json(nullptr);
    if (!c.bot_kind.empty()) p["bot_kind"] = c.bot_kind;
    people[id] = std::move(p);
  }
  return {{"customers", people},
          {"event_person", event_person},
          {"duplicate_glitch", duplicate_glitch},
          {"ambiguous_events", ambiguous_events},
          {"shared_cookies", shared_cookies},
          {"combos", combos},
          {"rates", {{"base", base_currency}, {"rates", rates}}}};
}

namespace {

constexpr std::int64_t kHour = kMillisPerHour;

const char* const kBrowserAgents[] = {
    "Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/120.0 Safari/537.36",
    "Mozilla/5.0 (Macintosh; Intel Mac OS X 14_2) AppleWebKit/605.1.15 (KHTML, like Gecko) Version/17.2 Safari/605.1.15",
    "Mozilla/5.0 (iPhone; CPU iPhone OS 17_2 like Mac OS X) AppleWebKit/605.1.15 (KHTML, like Gecko) Mobile/15E148",
    "Mozilla/5.0 (X11; Linux x86_64; rv:121.0) Gecko/20100101 Firefox/121.0",
};
constexpr const char* kCrawlerAgent = "Mozilla/5.0 (compatible; Googlebot/2.1; +http://www.google.com/bot.html)";

std::string pad(std::size_t n, int width) {
  std::string s = std::to_string(n);
  return s.size() >= static_cast<std::size_t>(width) ? s : std::string(width - s.size(), '0') + s;
}

struct Catalog {
  std::vector<std::string> products;  // regular SKUs then combo ids
  std::map<std::string, std::vector<std::string>> combo_members;
  std::map<std::string, double> base_price;
};

Catalog build_catalog(const SynthConfig& cfg) {
  Catalog cat;
  std::mt19937_64 rng(detail::mix_seed(cfg.seed ^ 0x5eedca7a1091ULL));
  std::uniform_real_distribution<double> price(cfg.price_min, cfg.price_max);
  for (std::size_t i = 0; i < cfg.catalog; ++i) {
    cat.products.push_back("sku" + pad(i, 5));
    cat.base_price[cat.products.back()] = std::round(price(rng) * 100.0) / 100.0;
  }
  for (std::size_t k = 0; k < cfg.combo_catalog; ++k) {
    const std::string id = "combo" + pad(k, 3);
    cat.products.push_back(id);
    cat.base_price[id] = std::round(price(rng) * 2.0 * 100.0) / 100.0;
    const std::size_t parts = 2 + k % 2;
    for (std::size_t m = 0; m < parts; ++m) cat.combo_members[id].push_back(id + "-" + static_cast<char>('a' + m));
  }
  return cat;
}

// Output of one customer's generation, merged in person order afterwards.
struct PersonOutput {
  std::vector<Event> events;
  std::vector<std::string> glitches;
  std::vector<std::string> ambiguous;
};

class PersonGen {
 public:
  PersonGen(const SynthConfig& cfg, const Catalog& cat, const SynthCustomer& who, const std::vector<double>& day_factor,
            const std::string& currency, double rate, const std::set<std::string>& shared, std::uint64_t seed)
      : cfg_(cfg), cat_(cat), who_(who), day_factor_(day_factor), currency_(currency), rate_(rate), shared_(shared),
        rng_(seed) {
    const std::uint64_t h = detail::mix_seed(seed);
    ua_ = kBrowserAgents[h % 4];
    ip_ = "10." + std::to_string((h >> 8) % 256) + "." + std::to_string((h >> 16) % 256) + "." +
          std::to_string(1 + (h >> 24) % 254);
    if (who.label == CustomerLabel::Bot && who.bot_kind == "signature") {
      ua_ = kCrawlerAgent;
      ip_ = "66.249." + std::to_string(64 + (h >> 8) % 32) + "." + std::to_string(1 + (h >> 16) % 254);
    }
  }

  PersonOutput run() {
    switch (who_.label) {
      case CustomerLabel::Bounce: bounce(); break;
      case CustomerLabel::Bot: bot(); break;
      case CustomerLabel::B2B: shopper(/*b2b=*/true, {}); break;
      case CustomerLabel::Outlier: shopper(false, outlier_days()); break;
      case CustomerLabel::Clean: shopper(false, {}); break;
    }
    return std::move(out_);
  }

 private:
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
  std::int64_t uniform_int(std::int64_t a, std::int64_t b) { return std::uniform_int_distribution<std::int64_t>(a, b)(rng_); }
  bool chance(double p) { return p > 0.0 && uniform(0.0, 1.0) < p; }

  std::int64_t human_gap() {
    const double s = std::lognormal_distribution<double>(std::log(cfg_.gap_median_s), cfg_.gap_sigma)(rng_);
    return static_cast<std::int64_t>(std::clamp(s, 1.0, cfg_.gap_cap_s) * 1000.0);
  }

  std::int64_t day_start(std::size_t d) const { return cfg_.start_ms + static_cast<std::int64_t>(d) * kMillisPerDay; }

  const std::string& pick(const std::set<std::string>& avoid) {
    for (;;) {
      const auto& p = cat_.products[uniform_int(0, static_cast<std::int64_t>(cat_.products.size()) - 1)];
      if (!avoid.count(p)) return p;
    }
  }

  std::vector<std::string> recommend(std::size_t n, const std::set<std::string>& avoid) {
    std::set<std::string> chosen(avoid);
    std::vector<std::string> out;
    while (out.size() < n) {
      const auto& p = pick(chosen);
      chosen.insert(p);
      out.push_back(p);
    }
    return out;
  }

  Event base(EventType type, std::int64_t t) {
    Event e;
    e.event_id = who_.person_id + "-" + pad(++counter_, 6);
    e.event_type = type;
    e.timestamp_utc = t;
    e.cookie_id = cookie_;
    if (logged_in_) e.user_id = who_.user_id;
    e.user_agent = ua_;
    e.ip = ip_;
    e.segment_flag = who_.segment;
    return e;
  }

  void emit(Event e) {
    const bool ambiguous = !logged_in_ && shared_.count(cookie_);
    if (chance(cfg_.duplicate_glitch_prob)) {
      Event copy = e;
      copy.event_id += "-d";
      copy.timestamp_utc += uniform_int(1, 1500);
      out_.glitches.push_back(copy.event_id);
      if (ambiguous) out_.ambiguous.push_back(copy.event_id);
      out_.events.push_back(std::move(copy));
    }
    if (ambiguous) out_.ambiguous.push_back(e.event_id);
    out_.events.push_back(std::move(e));
  }

  void hit(std::int64_t t, PageType page, const std::string& widget, const std::vector<std::string>& recs,
           std::optional<int> page_number = std::nullopt) {
    Event e = base(EventType::Hit, t);
    e.page_type = page;
    e.widget_id = widget;
    e.page_number = page_number;
    for (std::size_t i = 0; i < recs.size(); ++i) e.recommended_products.push_back({recs[i], static_cast<int>(i)});
    emit(std::move(e));
  }

  void interaction(EventType type, std::int64_t t, const std::string& product, int quantity = 1) {
    Event e = base(type, t);
    e.page_type = type == EventType::Click ? PageType::Pdp : PageType::Cart;
    e.product_id = product;
    e.quantity = quantity;
    if (type == EventType::Buy) {
      const double amount = cat_.base_price.at(product) / rate_;
      e.unit_price = Money{std::round(amount * 100.0) / 100.0, currency_};
    }
    emit(std::move(e));
  }

  void buy(std::int64_t t, const std::string& product, int quantity) {
    auto it = cat_.combo_members.find(product);
    if (it == cat_.combo_members.end()) {
      interaction(EventType::Buy, t, product, quantity);
      return;
    }
    // Combo purchases land as one row per member SKU.
    const double share = cat_.base_price.at(product) / static_cast<double>(it->second.size());
    for (std::size_t m = 0; m < it->second.size(); ++m) {
      Event e = base(EventType::Buy, t + static_cast<std::int64_t>(m));
      e.page_type = PageType::Cart;
      e.product_id = it->second[m];
      e.quantity = quantity;
      e.unit_price = Money{std::round(share / rate_ * 100.0) / 100.0, currency_};
      emit(std::move(e));
    }
  }

  void choose_cookie(bool force_login_on_new) {
    cookie_ = who_.cookies[uniform_int(0, static_cast<std::int64_t>(who_.cookies.size()) - 1)];
    logged_in_ = false;
    if (!who_.user_id) return;
    const bool first_on_cookie = used_cookies_.insert(cookie_).second;
    logged_in_ = (force_login_on_new && first_on_cookie) || chance(cfg_.login_prob);
  }

  double ctr_for(std::size_t day, std::size_t history) const {
    double p = cfg_.base_ctr * day_factor_[day];
    if (who_.segment == Segment::A2) p *= cfg_.segment_ctr_ratio;
    if (history < cfg_.new_customer_ramp_clicks) p *= cfg_.new_customer_ctr_factor;
    return std::min(p, 0.95);
  }

  struct SessionPlan {
    std::size_t views = 1;
    std::size_t forced_buys = 0;  // B2B: these views always end in a purchase
    bool allow_carts = true;
  };

  // Landing hit, a chain of product views (each a CLICK then a PDP hit),
  // cart adds and a checkout. Returns the session end time.
  std::int64_t session(std::size_t day, std::int64_t t, const SessionPlan& plan) {
    choose_cookie(true);
    std::set<std::string> viewed;
    std::vector<std::string> recs;
    std::vector<std::pair<std::string, int>> cart;
    std::set<std::string> shown;

    if (chance(cfg_.plp_landing_prob)) {
      const int page = chance(0.8) ? 1 : 2;
      auto grid = recommend(12, {});
      hit(t, PageType::Plp, "plp_grid", grid, page);
      recs.assign(grid.begin(), grid.begin() + 8);
      shown.insert(grid.begin(), grid.end());
    } else {
      recs = recommend(8, {});
      hit(t, PageType::Home, "home_top", recs);
      shown.insert(recs.begin(), recs.end());
    }
    std::size_t hit_history = history_;

    const double p_atc = cfg_.base_atctr / cfg_.base_ctr;
    const double p_buy = cfg_.base_btr / cfg_.base_atctr;
    for (std::size_t v = 0; v < plan.views; ++v) {
      t += human_gap();
      std::set<std::string> avoid(viewed);
      std::string product;
      if (chance(ctr_for(day, hit_history))) {
        std::vector<std::string> fresh;
        for (const auto& r : recs)
          if (!viewed.count(r)) fresh.push_back(r);
        if (!fresh.empty()) product = fresh[uniform_int(0, static_cast<std::int64_t>(fresh.size()) - 1)];
      }
      if (product.empty()) {
        // Organic views skip anything shown this session so they never
        // pass for recommendation clicks.
        avoid.insert(shown.begin(), shown.end());
        product = pick(avoid);
      }
      viewed.insert(product);
      interaction(EventType::Click, t, product);
      ++history_;

      const std::int64_t t_hit = t + uniform_int(300, 1500);
      recs = recommend(8, {product});
      shown.insert(recs.begin(), recs.end());
      hit(t_hit, PageType::Pdp, "pdp_similar", recs);
      hit_history = history_;
      t = t_hit;

      const bool forced = v < plan.forced_buys;
      if (forced || (plan.allow_carts && chance(p_atc))) {
        t += uniform_int(2000, 30000);
        interaction(EventType::Atc, t, product);
        const int qty = forced ? static_cast<int>(uniform_int(1, 3)) : (chance(0.05) ? 2 : 1);
        if (forced || chance(p_buy)) cart.emplace_back(product, qty);
      }
    }

    // The last hit still gets its chance of a recommended click.
    if (chance(ctr_for(day, hit_history))) {
      std::vector<std::string> fresh;
      for (const auto& r : recs)
        if (!viewed.count(r)) fresh.push_back(r);
      if (!fresh.empty()) {
        t += human_gap();
        interaction(EventType::Click, t, fresh[uniform_int(0, static_cast<std::int64_t>(fresh.size()) - 1)]);
        ++history_;
      }
    }

    if (!cart.empty()) t += uniform_int(30000, 120000);
    for (const auto& [product, qty] : cart) {
      buy(t, product, qty);
      t += uniform_int(1000, 5000);
    }
    return t;
  }

  std::size_t daily_views() {
    const double v = std::lognormal_distribution<double>(cfg_.views_log_mu, cfg_.views_log_sigma)(rng_);
    return static_cast<std::size_t>(std::clamp<double>(std::ceil(v), 1.0, static_cast<double>(cfg_.views_cap)));
  }

  std::set<std::size_t> outlier_days() {
    std::set<std::size_t> days;
    const std::size_t n = std::min<std::size_t>(cfg_.days, 1 + uniform_int(0, 1));
    while (days.size() < n) days.insert(static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(cfg_.days) - 1)));
    return days;
  }

  void shopper(bool b2b, const std::set<std::size_t>& binge_days) {
    std::vector<std::size_t> active;
    const double visit = b2b ? std::max(cfg_.visit_prob, 0.8) : cfg_.visit_prob;
    for (std::size_t d = 0; d < cfg_.days; ++d)
      if (chance(visit) || binge_days.count(d)) active.push_back(d);
    if (active.empty()) active.push_back(static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(cfg_.days) - 1)));

    for (std::size_t d : active) {
      std::int64_t t = day_start(d) + uniform_int(7 * kHour, 17 * kHour);
      if (binge_days.count(d)) {
        const auto views = static_cast<std::size_t>(uniform_int(cfg_.outlier_views_min, cfg_.outlier_views_max));
        t = day_start(d) + uniform_int(kHour, 5 * kHour);
        session(d, t, {views, 0, false});
        continue;
      }
      SessionPlan plan{daily_views(), 0, true};
      if (b2b) {
        const auto buys = static_cast<std::size_t>(std::llround(cfg_.b2b_buy_multiplier * uniform(0.8, 1.5)));
        plan.forced_buys = buys;
        plan.views = std::max(plan.views, buys + 2);
      }
      if (plan.views >= 4 && !b2b && chance(0.3)) {
        SessionPlan first = plan, second = plan;
        first.views = plan.views / 2;
        second.views = plan.views - first.views;
        t = session(d, t, first);
        session(d, t + uniform_int(40 * kMillisPerMinute, 180 * kMillisPerMinute), second);
      } else {
        session(d, t, plan);
      }
    }
  }

  void bounce() {
    choose_cookie(false);
    const auto d = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(cfg_.days) - 1));
    const std::int64_t t = day_start(d) + uniform_int(6 * kHour, 22 * kHour);
    if (chance(cfg_.plp_landing_prob))
      hit(t, PageType::Plp, "plp_grid", recommend(12, {}), 1);
    else
      hit(t, PageType::Home, "home_top", recommend(8, {}));
  }

  void bot() {
    choose_cookie(false);
    const std::size_t n_days = std::min<std::size_t>(cfg_.days, static_cast<std::size_t>(uniform_int(1, 3)));
    std::set<std::size_t> days;
    while (days.size() < n_days) days.insert(static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(cfg_.days) - 1)));

    for (std::size_t d : days) {
      std::int64_t t = day_start(d) + uniform_int(kHour, 20 * kHour);
      std::size_t clicks = 0;
      if (who_.bot_kind == "fast") clicks = static_cast<std::size_t>(uniform_int(20, 60));
      else if (who_.bot_kind == "regular") clicks = static_cast<std::size_t>(uniform_int(30, 80));
      else clicks = static_cast<std::size_t>(uniform_int(5, 20));
      for (std::size_t i = 0; i < clicks; ++i) {
        if (who_.bot_kind == "fast") {
          t += static_cast<std::int64_t>(uniform(0.5, 1.5) * 1000.0 / cfg_.bot_clicks_per_second);
        } else if (who_.bot_kind == "regular") {
          t += static_cast<std::int64_t>(static_cast<double>(cfg_.bot_regular_gap_ms) * uniform(0.99, 1.01));
        } else {
          t += human_gap();
        }
        const std::string& product = pick({});
        interaction(EventType::Click, t, product);
        hit(t + 100, PageType::Pdp, "pdp_similar", recommend(8, {product}));
      }
    }
  }

  const SynthConfig& cfg_;
  const Catalog& cat_;
  const SynthCustomer& who_;
  const std::vector<double>& day_factor_;
  std::string currency_;
  double rate_;
  const std::set<std::string>& shared_;
  std::mt19937_64 rng_;
  std::string ua_, ip_;
  std::string cookie_;
  bool logged_in_ = false;
  std::set<std::string> used_cookies_;
  std::size_t history_ = 0;
  std::size_t counter_ = 0;
  PersonOutput out_;
};

}  // namespace

SynthResult generate(const SynthConfig& cfg) {
  cfg.validate();
  const Catalog cat = build_catalog(cfg);
  const std::size_t n = cfg.customers;

  std::vector<SynthCustomer> people(n);
  for (std::size_t i = 0; i < n; ++i) people[i].person_id = "P" + pad(i, 6);

  // Labels go to a seeded permutation so special customers are spread out.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 master(detail::mix_seed(cfg.seed));
  std::shuffle(order.begin(), order.end(), master);

  const auto bounces = static_cast<std::size_t>(std::llround(cfg.bounce_fraction * static_cast<double>(n)));
  std::size_t pos = 0;
  auto take = [&](std::size_t count, CustomerLabel label) {
    for (std::size_t k = 0; k < count; ++k) people[order[pos++]].label = label;
  };
  take(bounces, CustomerLabel::Bounce);
  const std::size_t bots_begin = pos;
  take(cfg.bot_count, CustomerLabel::Bot);
  for (std::size_t k = bots_begin; k < pos; ++k) {
    static const char* const kinds[] = {"fast", "regular", "signature"};
    people[order[k]].bot_kind = kinds[(k - bots_begin) % 3];
  }
  take(cfg.b2b_count, CustomerLabel::B2B);
  take(cfg.outlier_customers, CustomerLabel::Outlier);
  const std::size_t clean_begin = pos;

  // Accounts and cookies.
  std::vector<bool> shared_member(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    auto& p = people[i];
    std::mt19937_64 attr(detail::mix_seed(cfg.seed ^ detail::mix_seed(i + 1)));
    const bool account = p.label == CustomerLabel::B2B || p.label == CustomerLabel::Outlier ||
                         (p.label == CustomerLabel::Clean &&
                          std::uniform_real_distribution<double>(0.0, 1.0)(attr) < cfg.account_fraction);
    if (account) p.user_id = "U" + pad(i, 6);
    p.cookies.push_back("C" + pad(i, 6));
  }
  GroundTruth truth;
  for (std::size_t k = 0; k < cfg.shared_cookie_pairs; ++k) {
    const std::string cookie = "H" + pad(k, 5);
    truth.shared_cookies.insert(cookie);
    for (std::size_t m = 0; m < 2; ++m) {
      auto& p = people[order[clean_begin + 2 * k + m]];
      p.user_id = "U" + p.person_id.substr(1);
      p.cookies = {cookie};
      shared_member[order[clean_begin + 2 * k + m]] = true;
    }
  }
  const auto multi = static_cast<std::size_t>(std::llround(cfg.multi_device_fraction * static_cast<double>(n)));
  std::size_t assigned = 0;
  for (std::size_t k = clean_begin + 2 * cfg.shared_cookie_pairs; k < n && assigned < multi; ++k) {
    auto& p = people[order[k]];
    if (!p.user_id) continue;
    p.cookies.push_back(p.cookies.front() + "m");
    ++assigned;
  }

  std::set<std::string> ids;
  for (const auto& p : people) ids.insert(p.person_id);
  const auto segments = assign_segments(ids, cfg.seed);
  for (auto& p : people) p.segment = segments.assignment.at(p.person_id);

  std::vector<double> day_factor(cfg.days);
  {
    std::mt19937_64 day_rng(detail::mix_seed(cfg.seed ^ 0xda11ULL));
    std::normal_distribution<double> z(0.0, cfg.daily_ctr_variation);
    for (auto& f : day_factor) f = cfg.daily_ctr_variation > 0.0 ? std::exp(z(day_rng)) : 1.0;
  }

  double total_weight = 0.0;
  for (const auto& c : cfg.currencies) total_weight += c.weight;
  std::vector<const CurrencyShare*> currency(n);
  for (std::size_t i = 0; i < n; ++i) {
    double u = static_cast<double>(detail::mix_seed(cfg.seed * 31 + i) >> 11) / 9007199254740992.0 * total_weight;
    currency[i] = &cfg.currencies.back();
    for (const auto& c : cfg.currencies) {
      if (u < c.weight) {
        currency[i] = &c;
        break;
      }
      u -= c.weight;
    }
  }

  std::vector<PersonOutput> outputs(n);
  const std::size_t chunk = 64;
  detail::for_each_chunk((n + chunk - 1) / chunk, [&](std::size_t c) {
    for (std::size_t i = c * chunk; i < std::min(n, (c + 1) * chunk); ++i) {
      PersonGen gen(cfg, cat, people[i], day_factor, currency[i]->code, currency[i]->rate, truth.shared_cookies,
                    detail::mix_seed(cfg.seed ^ detail::mix_seed(0x9e0000 + i)));
      outputs[i] = gen.run();
    }
  });

  std::vector<Event> events;
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& e : outputs[i].events) {
      truth.event_person.emplace(e.event_id, people[i].person_id);
      events.push_back(std::move(e));
    }
    truth.duplicate_glitch.insert(outputs[i].glitches.begin(), outputs[i].glitches.end());
    truth.ambiguous_events.insert(outputs[i].ambiguous.begin(), outputs[i].ambiguous.end());
  }
  for (auto& p : people) truth.customers.emplace(p.person_id, std::move(p));
  for (const auto& [combo, members] : cat.combo_members)
    for (const auto& sku : members) truth.combos[sku] = combo;
  truth.base_currency = cfg.base_currency;
  for (const auto& c : cfg.currencies) truth.rates[c.code] = c.rate;

  LogMetadata meta{"synth:seed=" + std::to_string(cfg.seed), 0, {}};
  return {EventLog(std::move(events), std::move(meta)), std::move(truth)};
}

}  // namespace clickprep
