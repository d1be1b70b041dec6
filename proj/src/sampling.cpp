#include "prisel/sampling.hpp"

#include <variant>

#include "prisel/error.hpp"

namespace prisel {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

double draw_effect(const TruePrior& prior, CounterRng& rng) {
  const auto& comps = prior.components();
  if (comps.empty()) throw InputError("draw_effect: empty prior");
  double u = rng.uniform();
  std::size_t pick = comps.size() - 1;
  for (std::size_t c = 0; c < comps.size(); ++c) {
    if (u < comps[c].weight) {
      pick = c;
      break;
    }
    u -= comps[c].weight;
  }
  return std::visit(overloaded{
                        [](const PointMass& p) { return p.at; },
                        [&](const UniformInterval& iv) { return rng.uniform(iv.lo, iv.hi); },
                        [&](const NormalComponent& n) { return n.mean + n.sd * rng.normal(); },
                    },
                    comps[pick].shape);
}

double draw_sigma(const SigmaLaw& law, CounterRng& rng) {
  if (law.is_point()) return law.lo;
  return rng.uniform(law.lo, law.hi);
}

std::size_t draw_block(const GenerativeModel& model, CounterRng& rng) {
  if (model.blocks.empty()) throw InputError("generative model has no blocks");
  if (model.blocks.size() == 1) return 0;
  double u = rng.uniform();
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    if (u < model.blocks[b].weight) return b;
    u -= model.blocks[b].weight;
  }
  return model.blocks.size() - 1;
}

}  // namespace prisel
