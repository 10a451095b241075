#include "mtda/optim.hpp"

#include <cmath>

#include "mtda/errors.hpp"

namespace mtda {

Sgd::Sgd(double lr, double momentum, double weight_decay) : lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ArgumentError("learning rate must be > 0");
  if (!(momentum >= 0.0)) throw ArgumentError("momentum must be >= 0");
  if (!(weight_decay >= 0.0)) throw ArgumentError("weight decay must be >= 0");
}

Sgd make_optimizer(double lr, double momentum, double weight_decay) { return Sgd(lr, momentum, weight_decay); }

void Sgd::add_group(std::string name, std::vector<Parameter*> params) {
  Group g{std::move(name), {}, {}};
  for (Parameter* p : params) {
    if (!p->trainable) continue;
    g.params.push_back(p);
    g.velocity.emplace_back(p->value.shape());
  }
  groups_.push_back(std::move(g));
}

void Sgd::rebind(std::string_view group, std::vector<Parameter*> params) {
  for (Group& g : groups_) {
    if (g.name != group) continue;
    std::vector<Parameter*> trainable;
    for (Parameter* p : params)
      if (p->trainable) trainable.push_back(p);
    if (trainable.size() != g.params.size()) throw ShapeError("optimizer rebind: parameter count mismatch");
    g.params = std::move(trainable);
    return;
  }
  throw ArgumentError("optimizer has no group '" + std::string(group) + "'");
}

void Sgd::step_group(Group& g) {
  for (std::size_t i = 0; i < g.params.size(); ++i) {
    Parameter& p = *g.params[i];
    Tensor& v = g.velocity[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double d = p.grad[j] + weight_decay_ * p.value[j];
      v[j] = momentum_ * v[j] + d;
      p.value[j] -= lr_ * v[j];
    }
  }
}

void Sgd::step(std::initializer_list<std::string_view> names) {
  for (std::string_view n : names) {
    bool found = false;
    for (Group& g : groups_)
      if (g.name == n) {
        step_group(g);
        found = true;
      }
    if (!found) throw ArgumentError("optimizer has no group '" + std::string(n) + "'");
  }
}

void Sgd::step_all() {
  for (Group& g : groups_) step_group(g);
}

void Sgd::zero_grad() {
  for (Group& g : groups_)
    for (Parameter* p : g.params) p->zero_grad();
}

}  // namespace mtda
