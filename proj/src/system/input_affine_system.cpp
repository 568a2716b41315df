#include "fblc/system/input_affine_system.hpp"

#include <set>

#include "fblc/symbolic/parser.hpp"

namespace fblc::system {

void InputAffineSystem::validate() const {
  const std::size_t n = states.size();
  const std::size_t m = inputs.size();
  if (n == 0) throw SystemError("system has no states");
  if (drift.size() != n) throw SystemError("drift has " + std::to_string(drift.size()) + " rows, expected " + std::to_string(n));
  if (input_map.size() != n) throw SystemError("input map has " + std::to_string(input_map.size()) + " rows, expected " + std::to_string(n));
  for (const auto& row : input_map) {
    if (row.size() != m) throw SystemError("input map row has " + std::to_string(row.size()) + " columns, expected " + std::to_string(m));
  }
  if (output.size() != m) throw SystemError("output has " + std::to_string(output.size()) + " entries, expected " + std::to_string(m));
  if (x0.size() != n) throw SystemError("initial state has " + std::to_string(x0.size()) + " entries, expected " + std::to_string(n));

  std::set<std::string> allowed(states.begin(), states.end());
  if (allowed.size() != n) throw SystemError("duplicate state name");
  if (allowed.count(symbolic::kTimeVariable) != 0) throw SystemError("state may not be named t");
  for (const auto& u : inputs) {
    if (allowed.count(u) != 0) throw SystemError("input '" + u + "' collides with a state name");
  }
  allowed.insert(symbolic::kTimeVariable);
  auto check = [&](const Expr& e, const std::string& where) {
    for (const auto& v : e.free_variables()) {
      if (allowed.count(v) == 0) throw SystemError(where + " depends on '" + v + "', which is not a state or t");
    }
  };
  for (std::size_t i = 0; i < n; ++i) {
    check(drift[i], "drift row " + std::to_string(i + 1));
    for (std::size_t j = 0; j < m; ++j) check(input_map[i][j], "input map entry");
  }
  for (const auto& h : output) check(h, "output");
}

std::optional<std::size_t> InputAffineSystem::state_index(const std::string& name) const {
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i] == name) return i;
  }
  return std::nullopt;
}

std::vector<Expr> InputAffineSystem::input_column(std::size_t j) const {
  std::vector<Expr> col;
  col.reserve(input_map.size());
  for (const auto& row : input_map) col.push_back(row.at(j));
  return col;
}

std::vector<std::string> InputAffineSystem::variables() const {
  std::vector<std::string> v{symbolic::kTimeVariable};
  v.insert(v.end(), states.begin(), states.end());
  return v;
}

symbolic::Binding InputAffineSystem::binding(double t, std::span<const double> x) const {
  if (x.size() != states.size()) throw SystemError("binding: state vector has wrong length");
  symbolic::Binding b(t);
  for (std::size_t i = 0; i < states.size(); ++i) b.set(states[i], x[i]);
  return b;
}

InputAffineSystem parse_system(const SystemText& text) {
  InputAffineSystem sys;
  sys.states = text.states;
  sys.inputs = text.inputs;
  auto parse = [&](const std::string& s) { return symbolic::simplify(symbolic::parse_expr(s, text.states)); };
  for (const auto& f : text.drift) sys.drift.push_back(parse(f));
  for (const auto& row : text.input_map) {
    std::vector<Expr> r;
    for (const auto& g : row) r.push_back(parse(g));
    sys.input_map.push_back(std::move(r));
  }
  for (const auto& h : text.output) sys.output.push_back(parse(h));
  sys.x0 = text.x0;
  sys.t0 = text.t0;
  sys.validate();
  return sys;
}

}  // namespace fblc::system
