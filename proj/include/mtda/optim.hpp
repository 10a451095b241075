#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include "mtda/layers.hpp"

namespace mtda {

// SGD with classical momentum and L2 weight decay:
//   d = grad + weight_decay * theta;  v = momentum * v + d;  theta -= lr * v.
// Parameters are registered in named groups and a step touches only the
// groups it is given, so frozen parts keep both values and velocities.
class Sgd {
 public:
  Sgd(double lr, double momentum, double weight_decay);  // ArgumentError for lr <= 0

  void add_group(std::string name, std::vector<Parameter*> params);
  void step(std::initializer_list<std::string_view> groups);
  void step_all();
  void zero_grad();

  // Re-binds parameter pointers after the owning networks moved or were
  // copied; group sizes must match.
  void rebind(std::string_view group, std::vector<Parameter*> params);

  double lr() const { return lr_; }
  double momentum() const { return momentum_; }
  double weight_decay() const { return weight_decay_; }

  struct Group {
    std::string name;
    std::vector<Parameter*> params;
    std::vector<Tensor> velocity;
  };
  const std::vector<Group>& groups() const { return groups_; }
  std::vector<Group>& groups() { return groups_; }

 private:
  void step_group(Group& g);

  double lr_, momentum_, weight_decay_;
  std::vector<Group> groups_;
};

Sgd make_optimizer(double lr, double momentum, double weight_decay);

}  // namespace mtda
