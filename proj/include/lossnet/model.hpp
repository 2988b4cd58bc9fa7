#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

#include "lossnet/rng.hpp"

namespace lossnet {

/// Raised when a model object would be constructed outside its domain.
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PointMass {
  double d;
};
struct Uniform01 {};
struct BetaLength {
  double alpha;
  double beta;
};
struct DiscreteFinite {
  struct Atom {
    double value;
    double prob;
  };
  std::vector<Atom> atoms;
};

struct Moments {
  double rho1;
  double rho2;
};

/// Law of the call length. All variants have compact support; the factories
/// reject anything that would break that.
class LengthDistribution {
 public:
  using Variant = std::variant<PointMass, Uniform01, BetaLength, DiscreteFinite>;

  static LengthDistribution point_mass(double d);
  static LengthDistribution uniform01();
  static LengthDistribution beta(double alpha, double beta);
  static LengthDistribution discrete(std::vector<DiscreteFinite::Atom> atoms);

  /// Parses the flat CLI grammar:
  ///   uniform01 | pointmass:<d> | beta:<a>:<b> | discrete:<v1>:<p1>,<v2>:<p2>,...
  static LengthDistribution parse(const std::string& spec);
  static LengthDistribution from_json(const nlohmann::json& j);

  [[nodiscard]] nlohmann::json to_json() const;
  [[nodiscard]] std::string to_spec() const;

  [[nodiscard]] const Variant& variant() const { return v_; }
  [[nodiscard]] bool is_discrete() const;
  /// Atoms of a discrete law; PointMass is reported as a single atom.
  [[nodiscard]] std::vector<DiscreteFinite::Atom> atoms() const;

 private:
  explicit LengthDistribution(Variant v) : v_(std::move(v)) {}
  Variant v_;
};

Moments moments(const LengthDistribution& pi);
double support_sup(const LengthDistribution& pi);
double sample_length(const LengthDistribution& pi, Rng& rng);
/// Draws from the length-biased law v*pi(dv)/rho1.
double sample_size_biased_length(const LengthDistribution& pi, Rng& rng);

struct ModelParams {
  double lambda;
  int capacity;
  LengthDistribution pi;

  ModelParams(double lambda, int capacity, LengthDistribution pi);
};

enum class Color : std::uint8_t { Green, Black };

/// A call cylinder: open basis (xi, xi+u) times closed life [birth, death].
struct Rect {
  std::int64_t id = 0;
  double xi = 0.0;
  double u = 0.0;
  double birth = 0.0;
  double death = 0.0;
  int generation = 0;
  Color color = Color::Green;
  double flag = 0.0;

  [[nodiscard]] double right() const { return xi + u; }
  [[nodiscard]] bool alive_at(double t) const { return birth <= t && t <= death; }
};

struct Window {
  double a;
  double b;

  Window(double a, double b);
  static Window point(double x) { return {x, x}; }
};

struct Interval {
  double left;
  double right;
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct Configuration {
  std::vector<Interval> calls;
};

bool intersects(const Rect& r, const Rect& s);

/// True iff admitting `candidate` at its birth instant would push some point
/// of its basis above `capacity` concurrent calls. Every member of `kept` must
/// be born no later than the candidate.
bool blocks(const Rect& candidate, std::span<const Rect> kept, int capacity);

/// Maximum number of open intervals covering a common point strictly inside
/// (lo, hi). Intervals are clipped to (lo, hi) first.
int max_coverage(std::span<const Interval> intervals, double lo, double hi);

}  // namespace lossnet
