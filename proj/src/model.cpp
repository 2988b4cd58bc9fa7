#include "lossnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lossnet {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double parse_double(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ModelError("malformed number '" + s + "' in length spec '" + context + "'");
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double beta_sample(double a, double b, Rng& rng) {
  double x = std::gamma_distribution<double>(a, 1.0)(rng);
  double y = std::gamma_distribution<double>(b, 1.0)(rng);
  return x / (x + y);
}

}  // namespace

LengthDistribution LengthDistribution::point_mass(double d) {
  if (!(d > 0.0) || !std::isfinite(d)) throw ModelError("pointmass length must be > 0");
  return LengthDistribution(PointMass{d});
}

LengthDistribution LengthDistribution::uniform01() { return LengthDistribution(Uniform01{}); }

LengthDistribution LengthDistribution::beta(double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta))
    throw ModelError("beta parameters must be > 0");
  return LengthDistribution(BetaLength{alpha, beta});
}

LengthDistribution LengthDistribution::discrete(std::vector<DiscreteFinite::Atom> atoms) {
  if (atoms.empty()) throw ModelError("discrete law needs at least one atom");
  double total = 0.0;
  for (const auto& a : atoms) {
    if (!(a.value > 0.0) || !std::isfinite(a.value)) throw ModelError("atom values must be > 0");
    if (!(a.prob >= 0.0) || a.prob > 1.0) throw ModelError("atom probabilities must lie in [0,1]");
    total += a.prob;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ModelError("atom probabilities must sum to 1");
  std::sort(atoms.begin(), atoms.end(), [](auto& l, auto& r) { return l.value < r.value; });
  for (std::size_t i = 1; i < atoms.size(); ++i)
    if (atoms[i].value == atoms[i - 1].value) throw ModelError("atom values must be distinct");
  return LengthDistribution(DiscreteFinite{std::move(atoms)});
}

LengthDistribution LengthDistribution::parse(const std::string& spec) {
  auto parts = split(spec, ':');
  if (parts.empty()) throw ModelError("empty length spec");
  const std::string& kind = parts[0];
  if (kind == "uniform01" && parts.size() == 1) return uniform01();
  if (kind == "pointmass" && parts.size() == 2) return point_mass(parse_double(parts[1], spec));
  if (kind == "beta" && parts.size() == 3)
    return beta(parse_double(parts[1], spec), parse_double(parts[2], spec));
  if (kind == "discrete" && spec.size() > 9) {
    std::vector<DiscreteFinite::Atom> atoms;
    for (const auto& item : split(spec.substr(9), ',')) {
      auto vp = split(item, ':');
      if (vp.size() != 2) throw ModelError("malformed discrete atom '" + item + "'");
      atoms.push_back({parse_double(vp[0], spec), parse_double(vp[1], spec)});
    }
    return discrete(std::move(atoms));
  }
  throw ModelError("malformed length spec '" + spec + "'");
}

LengthDistribution LengthDistribution::from_json(const nlohmann::json& j) {
  try {
    if (j.is_string()) return parse(j.get<std::string>());
    const auto type = j.at("type").get<std::string>();
    if (type == "uniform01") return uniform01();
    if (type == "pointmass") return point_mass(j.at("d").get<double>());
    if (type == "beta") return beta(j.at("alpha").get<double>(), j.at("beta").get<double>());
    if (type == "discrete") {
      std::vector<DiscreteFinite::Atom> atoms;
      for (const auto& pair : j.at("atoms")) {
        if (!pair.is_array() || pair.size() != 2) throw ModelError("atom must be [value, prob]");
        atoms.push_back({pair[0].get<double>(), pair[1].get<double>()});
      }
      return discrete(std::move(atoms));
    }
    throw ModelError("unknown length type '" + type + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("malformed length JSON: ") + e.what());
  }
}

nlohmann::json LengthDistribution::to_json() const {
  return std::visit(
      Overloaded{
          [](const PointMass& p) { return nlohmann::json{{"type", "pointmass"}, {"d", p.d}}; },
          [](const Uniform01&) { return nlohmann::json{{"type", "uniform01"}}; },
          [](const BetaLength& b) {
            return nlohmann::json{{"type", "beta"}, {"alpha", b.alpha}, {"beta", b.beta}};
          },
          [](const DiscreteFinite& d) {
            auto atoms = nlohmann::json::array();
            for (const auto& a : d.atoms) atoms.push_back({a.value, a.prob});
            return nlohmann::json{{"type", "discrete"}, {"atoms", atoms}};
          }},
      v_);
}

std::string LengthDistribution::to_spec() const {
  auto num = [](double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
  };
  return std::visit(Overloaded{[&](const PointMass& p) { return "pointmass:" + num(p.d); },
                               [](const Uniform01&) { return std::string("uniform01"); },
                               [&](const BetaLength& b) {
                                 return "beta:" + num(b.alpha) + ":" + num(b.beta);
                               },
                               [&](const DiscreteFinite& d) {
                                 std::string s = "discrete:";
                                 for (std::size_t i = 0; i < d.atoms.size(); ++i) {
                                   if (i) s += ",";
                                   s += num(d.atoms[i].value) + ":" + num(d.atoms[i].prob);
                                 }
                                 return s;
                               }},
                    v_);
}

bool LengthDistribution::is_discrete() const {
  return std::holds_alternative<PointMass>(v_) || std::holds_alternative<DiscreteFinite>(v_);
}

std::vector<DiscreteFinite::Atom> LengthDistribution::atoms() const {
  if (const auto* p = std::get_if<PointMass>(&v_)) return {{p->d, 1.0}};
  if (const auto* d = std::get_if<DiscreteFinite>(&v_)) return d->atoms;
  throw ModelError("length law is not discrete");
}

Moments moments(const LengthDistribution& pi) {
  return std::visit(Overloaded{[](const PointMass& p) { return Moments{p.d, p.d * p.d}; },
                               [](const Uniform01&) { return Moments{0.5, 1.0 / 3.0}; },
                               [](const BetaLength& b) {
                                 double s = b.alpha + b.beta;
                                 return Moments{b.alpha / s,
                                                b.alpha * (b.alpha + 1.0) / (s * (s + 1.0))};
                               },
                               [](const DiscreteFinite& d) {
                                 Moments m{0.0, 0.0};
                                 for (const auto& a : d.atoms) {
                                   m.rho1 += a.prob * a.value;
                                   m.rho2 += a.prob * a.value * a.value;
                                 }
                                 return m;
                               }},
                    pi.variant());
}

double support_sup(const LengthDistribution& pi) {
  return std::visit(Overloaded{[](const PointMass& p) { return p.d; },
                               [](const Uniform01&) { return 1.0; },
                               [](const BetaLength&) { return 1.0; },
                               [](const DiscreteFinite& d) {
                                 double h = 0.0;
                                 for (const auto& a : d.atoms) h = std::max(h, a.value);
                                 return h;
                               }},
                    pi.variant());
}

double sample_length(const LengthDistribution& pi, Rng& rng) {
  return std::visit(
      Overloaded{[](const PointMass& p) { return p.d; },
                 [&](const Uniform01&) {
                   // (0,1]: a zero-length call would have an empty basis.
                   return 1.0 - uniform(rng, 0.0, 1.0);
                 },
                 [&](const BetaLength& b) { return beta_sample(b.alpha, b.beta, rng); },
                 [&](const DiscreteFinite& d) {
                   double x = uniform(rng, 0.0, 1.0);
                   for (const auto& a : d.atoms) {
                     if (x < a.prob) return a.value;
                     x -= a.prob;
                   }
                   return d.atoms.back().value;
                 }},
      pi.variant());
}

double sample_size_biased_length(const LengthDistribution& pi, Rng& rng) {
  return std::visit(
      Overloaded{[](const PointMass& p) { return p.d; },
                 // density 2v on (0,1)
                 [&](const Uniform01&) { return std::sqrt(1.0 - uniform(rng, 0.0, 1.0)); },
                 [&](const BetaLength& b) { return beta_sample(b.alpha + 1.0, b.beta, rng); },
                 [&](const DiscreteFinite& d) {
                   double rho1 = 0.0;
                   for (const auto& a : d.atoms) rho1 += a.prob * a.value;
                   double x = uniform(rng, 0.0, rho1);
                   for (const auto& a : d.atoms) {
                     if (x < a.prob * a.value) return a.value;
                     x -= a.prob * a.value;
                   }
                   return d.atoms.back().value;
                 }},
      pi.variant());
}

ModelParams::ModelParams(double lambda_, int capacity_, LengthDistribution pi_)
    : lambda(lambda_), capacity(capacity_), pi(std::move(pi_)) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ModelError("lambda must be > 0");
  if (capacity < 1) throw ModelError("capacity must be >= 1");
}

Window::Window(double a_, double b_) : a(a_), b(b_) {
  if (!(a <= b)) throw ModelError("window requires a <= b");
}

bool intersects(const Rect& r, const Rect& s) {
  return std::max(r.xi, s.xi) < std::min(r.right(), s.right()) &&
         std::max(r.birth, s.birth) <= std::min(r.death, s.death);
}

int max_coverage(std::span<const Interval> intervals, double lo, double hi) {
  // Open intervals: at a shared endpoint the closing one is removed before
  // the opening one is added, so touching intervals never stack.
  std::vector<std::pair<double, int>> events;
  events.reserve(2 * intervals.size());
  for (const auto& iv : intervals) {
    double l = std::max(iv.left, lo);
    double r = std::min(iv.right, hi);
    if (l < r) {
      events.emplace_back(l, +1);
      events.emplace_back(r, -1);
    }
  }
  std::sort(events.begin(), events.end());
  int cur = 0;
  int best = 0;
  for (std::size_t i = 0; i < events.size();) {
    double x = events[i].first;
    for (; i < events.size() && events[i].first == x; ++i) cur += events[i].second;
    best = std::max(best, cur);
  }
  return best;
}

bool blocks(const Rect& candidate, std::span<const Rect> kept, int capacity) {
  std::vector<Interval> covering;
  for (const auto& k : kept) {
    if (!k.alive_at(candidate.birth)) continue;
    if (std::max(k.xi, candidate.xi) < std::min(k.right(), candidate.right()))
      covering.push_back({k.xi, k.right()});
  }
  if (static_cast<int>(covering.size()) < capacity) return false;
  return max_coverage(covering, candidate.xi, candidate.right()) >= capacity;
}

}  // namespace lossnet
