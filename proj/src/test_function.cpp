#include "qgraph/test_function.hpp"

#include "qgraph/errors.hpp"

#include <cmath>
#include <map>
#include <optional>
#include <sstream>

namespace qgraph {

TestFunction::TestFunction(std::string name, double bound, std::function<double(double)> f)
    : name_(std::move(name)), bound_(bound), f_(std::move(f)) {
  if (!(bound_ > 0.0) || !std::isfinite(bound_)) throw ValidationError("test function bound must be positive");
}

void TestFunction::probe(double s_max, double modulus) const {
  constexpr int kGrid = 4000;
  for (int k = 0; k <= kGrid; ++k) {
    const double s = s_max * k / kGrid;
    const double v = f_(s);
    if (!std::isfinite(v) || std::abs(v) > bound_ * (1.0 + 1e-12)) {
      std::ostringstream msg;
      msg << "test function " << name_ << " exceeds its bound " << bound_ << " at s = " << s;
      throw ValidationError(msg.str());
    }
    if (std::abs(f_(s + 1e-6) - v) > modulus) {
      std::ostringstream msg;
      msg << "test function " << name_ << " is not continuous at s = " << s;
      throw ValidationError(msg.str());
    }
  }
}

TestFunction constant_one() {
  return {"one", 1.0, [](double) { return 1.0; }};
}

TestFunction gaussian(double c, double w) {
  if (!(w > 0.0)) throw ValidationError("gaussian: width must be positive");
  std::ostringstream name;
  name << "gaussian:c=" << c << ",w=" << w;
  return {name.str(), 1.0, [c, w](double s) { return std::exp(-(s - c) * (s - c) / (2.0 * w * w)); }};
}

TestFunction smooth_indicator(double a, double b, double w) {
  if (!(w > 0.0) || !(b > a)) throw ValidationError("indicator: need a < b and w > 0");
  std::ostringstream name;
  name << "indicator:a=" << a << ",b=" << b << ",w=" << w;
  return {name.str(), 1.0, [a, b, w](double s) { return 0.5 * (std::tanh((s - a) / w) - std::tanh((s - b) / w)); }};
}

TestFunction poly_gaussian(double c, double w, int p) {
  if (!(w > 0.0) || p < 0) throw ValidationError("polygauss: need w > 0 and p >= 0");
  // max of |u|^p e^{-u^2/2} sits at u^2 = p
  const double bound = p == 0 ? 1.0 : std::pow(static_cast<double>(p), 0.5 * p) * std::exp(-0.5 * p);
  std::ostringstream name;
  name << "polygauss:c=" << c << ",w=" << w << ",p=" << p;
  return {name.str(), bound, [c, w, p](double s) {
            const double u = (s - c) / w;
            return std::pow(u, p) * std::exp(-0.5 * u * u);
          }};
}

TestFunction parse_test_function(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  std::map<std::string, double> params;
  if (colon != std::string::npos) {
    std::stringstream rest(spec.substr(colon + 1));
    std::string item;
    while (std::getline(rest, item, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ValidationError("test function: expected key=value, got '" + item + "'");
      const std::string key = item.substr(0, eq);
      const std::string text = item.substr(eq + 1);
      std::size_t used = 0;
      double value = 0.0;
      try {
        value = std::stod(text, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != text.size() || text.empty()) throw ValidationError("test function: '" + key + "' is not a number");
      params[key] = value;
    }
  }
  auto take = [&](const std::string& key, std::optional<double> fallback = std::nullopt) {
    auto it = params.find(key);
    if (it == params.end()) {
      if (fallback) return *fallback;
      throw ValidationError("test function " + name + ": missing parameter '" + key + "'");
    }
    const double v = it->second;
    params.erase(it);
    return v;
  };

  std::optional<TestFunction> h;
  if (name == "one") {
    h = constant_one();
  } else if (name == "gaussian") {
    const double c = take("c", 1.0);
    h = gaussian(c, take("w", 0.5));
  } else if (name == "indicator") {
    const double a = take("a");
    const double b = take("b");
    h = smooth_indicator(a, b, take("w", 0.05));
  } else if (name == "polygauss") {
    const double c = take("c", 1.0);
    const double w = take("w", 0.5);
    const double p = take("p", 2.0);
    if (p != std::floor(p)) throw ValidationError("polygauss: p must be an integer");
    h = poly_gaussian(c, w, static_cast<int>(p));
  } else {
    throw ValidationError("unknown test function '" + name + "'");
  }
  if (!params.empty()) throw ValidationError("test function " + name + ": unknown parameter '" + params.begin()->first + "'");
  return *h;
}

}  // namespace qgraph
