#include "efbm/quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace efbm::quad {
namespace {

struct ExpandedRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Boost stores only the non-negative half of the symmetric rule.
template <unsigned N>
ExpandedRule expand() {
  using G = boost::math::quadrature::gauss<double, N>;
  const auto& x = G::abscissa();
  const auto& w = G::weights();
  ExpandedRule r;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) {
      r.nodes.push_back(0.0);
      r.weights.push_back(w[i]);
      continue;
    }
    r.nodes.push_back(x[i]);
    r.weights.push_back(w[i]);
    r.nodes.push_back(-x[i]);
    r.weights.push_back(w[i]);
  }
  return r;
}

template <unsigned N>
const ExpandedRule& cached() {
  static const ExpandedRule rule = expand<N>();
  return rule;
}

}  // namespace

GaussLegendreRule gauss_legendre_rule(int points) {
  const ExpandedRule* r = nullptr;
  switch (points) {
    case 7: r = &cached<7>(); break;
    case 10: r = &cached<10>(); break;
    case 15: r = &cached<15>(); break;
    case 20: r = &cached<20>(); break;
    case 25: r = &cached<25>(); break;
    case 30: r = &cached<30>(); break;
    default: throw std::invalid_argument("unsupported Gauss-Legendre order " + std::to_string(points));
  }
  return {r->nodes, r->weights};
}

}  // namespace efbm::quad
