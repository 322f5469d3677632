#include "efnlm/expression.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <variant>

#include "efnlm/error.hpp"

namespace efnlm {

Jet Jet::constant(double v, Eigen::Index p) { return {v, Vector::Zero(p), Matrix::Zero(p, p)}; }

Jet Jet::variable(double v, Eigen::Index index, Eigen::Index p) {
  Jet j = constant(v, p);
  j.grad(index) = 1.0;
  return j;
}

bool Jet::is_constant() const { return grad.isZero(0.0) && hess.isZero(0.0); }

namespace {

// f applied to a jet given f(u), f'(u), f''(u).
Jet chain(const Jet& u, double f, double df, double d2f) {
  Jet out;
  out.value = f;
  out.grad = df * u.grad;
  out.hess = df * u.hess + d2f * (u.grad * u.grad.transpose());
  return out;
}

void require_finite(const Jet& j, const char* op) {
  if (!std::isfinite(j.value) || !j.grad.allFinite() || !j.hess.allFinite()) {
    fail(ErrorCode::DomainError, std::string("expression: non-finite result in ") + op);
  }
}

}  // namespace

Jet operator+(const Jet& a, const Jet& b) { return {a.value + b.value, a.grad + b.grad, a.hess + b.hess}; }
Jet operator-(const Jet& a, const Jet& b) { return {a.value - b.value, a.grad - b.grad, a.hess - b.hess}; }
Jet operator-(const Jet& a) { return {-a.value, -a.grad, -a.hess}; }

Jet operator*(const Jet& a, const Jet& b) {
  Jet out;
  out.value = a.value * b.value;
  out.grad = a.value * b.grad + b.value * a.grad;
  out.hess = a.value * b.hess + b.value * a.hess + a.grad * b.grad.transpose() + b.grad * a.grad.transpose();
  return out;
}

Jet operator/(const Jet& a, const Jet& b) {
  if (b.value == 0.0) fail(ErrorCode::DomainError, "expression: division by zero");
  const double inv = 1.0 / b.value;
  return a * chain(b, inv, -inv * inv, 2.0 * inv * inv * inv);
}

Jet exp(const Jet& a) {
  const double e = std::exp(a.value);
  Jet out = chain(a, e, e, e);
  require_finite(out, "exp");
  return out;
}

Jet log(const Jet& a) {
  if (!(a.value > 0.0)) fail(ErrorCode::DomainError, "expression: log of non-positive value");
  const double inv = 1.0 / a.value;
  return chain(a, std::log(a.value), inv, -inv * inv);
}

Jet pow(const Jet& base, const Jet& exponent) {
  if (exponent.is_constant()) {
    const double c = exponent.value;
    const double x = base.value;
    if (x < 0.0 && c != std::nearbyint(c)) {
      fail(ErrorCode::DomainError, "expression: negative base raised to a non-integer power");
    }
    Jet out = chain(base, std::pow(x, c), c * std::pow(x, c - 1.0), c * (c - 1.0) * std::pow(x, c - 2.0));
    if (base.is_constant()) {
      out.grad.setZero();
      out.hess.setZero();
    }
    require_finite(out, "^");
    return out;
  }
  if (!(base.value > 0.0)) {
    fail(ErrorCode::DomainError, "expression: parameter-dependent power of a non-positive base");
  }
  return exp(exponent * log(base));
}

struct Expression::Node {
  enum class Kind { Number, Covariate, Parameter, Negate, Add, Subtract, Multiply, Divide, Power, Exp, Log };
  Kind kind = Kind::Number;
  double number = 0.0;
  Eigen::Index index = 0;
  std::shared_ptr<const Node> lhs;
  std::shared_ptr<const Node> rhs;
};

namespace {

using Node = Expression::Node;
using NodePtr = std::shared_ptr<const Node>;

bool is_name_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_name_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; }
bool is_function(std::string_view name) { return name == "log" || name == "exp"; }

class Parser {
 public:
  Parser(std::string_view text, const std::vector<std::string>& covariates,
         const std::vector<std::string>& parameters)
      : text_(text), covariates_(covariates), parameters_(parameters) {}

  NodePtr parse() {
    NodePtr root = expr();
    skip_space();
    if (pos_ != text_.size()) error("unexpected '" + std::string(1, text_[pos_]) + "'");
    return root;
  }

 private:
  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorCode::ParseError, "expression at column " + std::to_string(pos_ + 1) + ": " + what);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  static NodePtr make(Node::Kind kind, NodePtr lhs = nullptr, NodePtr rhs = nullptr) {
    auto node = std::make_shared<Node>();
    node->kind = kind;
    node->lhs = std::move(lhs);
    node->rhs = std::move(rhs);
    return node;
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = make(Node::Kind::Add, lhs, term());
      } else if (accept('-')) {
        lhs = make(Node::Kind::Subtract, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = make(Node::Kind::Multiply, lhs, unary());
      } else if (accept('/')) {
        lhs = make(Node::Kind::Divide, lhs, unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr unary() {
    if (accept('-')) return make(Node::Kind::Negate, unary());
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (accept('^')) return make(Node::Kind::Power, base, unary());
    return base;
  }

  NodePtr primary() {
    skip_space();
    if (pos_ >= text_.size()) error("unexpected end of input");
    const char c = text_[pos_];
    if (accept('(')) {
      NodePtr inner = expr();
      if (!accept(')')) error("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (is_name_start(c)) return name();
    error("unexpected '" + std::string(1, c) + "'");
  }

  NodePtr number() {
    const std::string rest(text_.substr(pos_));
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(rest, &used);
    } catch (const std::exception&) {
      error("malformed number");
    }
    pos_ += used;
    auto node = std::make_shared<Node>();
    node->kind = Node::Kind::Number;
    node->number = value;
    return node;
  }

  NodePtr name() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && is_name_char(text_[pos_])) ++pos_;
    const std::string id(text_.substr(start, pos_ - start));
    if (is_function(id)) {
      if (!accept('(')) error("expected '(' after " + id);
      NodePtr arg = expr();
      if (!accept(')')) error("expected ')'");
      return make(id == "log" ? Node::Kind::Log : Node::Kind::Exp, arg);
    }
    auto node = std::make_shared<Node>();
    const auto cov = std::find(covariates_.begin(), covariates_.end(), id);
    const auto par = std::find(parameters_.begin(), parameters_.end(), id);
    if (cov != covariates_.end()) {
      node->kind = Node::Kind::Covariate;
      node->index = cov - covariates_.begin();
    } else if (par != parameters_.end()) {
      node->kind = Node::Kind::Parameter;
      node->index = par - parameters_.begin();
    } else {
      pos_ = start;
      error("unknown name '" + id + "'");
    }
    return node;
  }

  std::string_view text_;
  const std::vector<std::string>& covariates_;
  const std::vector<std::string>& parameters_;
  std::size_t pos_ = 0;
};

Jet eval(const Node& node, const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& beta) {
  const Eigen::Index p = beta.size();
  switch (node.kind) {
    case Node::Kind::Number: return Jet::constant(node.number, p);
    case Node::Kind::Covariate: return Jet::constant(x(node.index), p);
    case Node::Kind::Parameter: return Jet::variable(beta(node.index), node.index, p);
    case Node::Kind::Negate: return -eval(*node.lhs, x, beta);
    case Node::Kind::Add: return eval(*node.lhs, x, beta) + eval(*node.rhs, x, beta);
    case Node::Kind::Subtract: return eval(*node.lhs, x, beta) - eval(*node.rhs, x, beta);
    case Node::Kind::Multiply: return eval(*node.lhs, x, beta) * eval(*node.rhs, x, beta);
    case Node::Kind::Divide: return eval(*node.lhs, x, beta) / eval(*node.rhs, x, beta);
    case Node::Kind::Power: return pow(eval(*node.lhs, x, beta), eval(*node.rhs, x, beta));
    case Node::Kind::Exp: return exp(eval(*node.lhs, x, beta));
    case Node::Kind::Log: return log(eval(*node.lhs, x, beta));
  }
  return Jet::constant(0.0, p);
}

}  // namespace

Expression Expression::parse(std::string_view text, std::vector<std::string> covariates,
                             std::vector<std::string> parameters) {
  for (const auto& name : parameters) {
    if (std::find(covariates.begin(), covariates.end(), name) != covariates.end()) {
      fail(ErrorCode::ParseError, "name '" + name + "' is both a covariate and a parameter");
    }
  }
  Expression e;
  e.text_ = std::string(text);
  e.root_ = Parser(text, covariates, parameters).parse();
  e.covariates_ = std::move(covariates);
  e.parameters_ = std::move(parameters);
  return e;
}

std::vector<std::string> Expression::identifiers(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      // skip a numeric literal including any exponent part
      ++i;
      while (i < text.size() && (std::isdigit(static_cast<unsigned char>(text[i])) || text[i] == '.')) ++i;
      if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < text.size() && (text[j] == '+' || text[j] == '-')) ++j;
        if (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) {
          i = j;
          while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
        }
      }
    } else if (is_name_start(c)) {
      const std::size_t start = i;
      while (i < text.size() && is_name_char(text[i])) ++i;
      std::string id(text.substr(start, i - start));
      if (!is_function(id) && std::find(out.begin(), out.end(), id) == out.end()) out.push_back(std::move(id));
    } else {
      ++i;
    }
  }
  return out;
}

Jet Expression::evaluate(const Eigen::Ref<const Vector>& covariates, const Eigen::Ref<const Vector>& beta) const {
  if (covariates.size() != static_cast<Eigen::Index>(covariates_.size()) ||
      beta.size() != static_cast<Eigen::Index>(parameters_.size())) {
    fail(ErrorCode::DimensionMismatch, "expression: argument sizes do not match declared names");
  }
  return eval(*root_, covariates, beta);
}

double Expression::value(const Eigen::Ref<const Vector>& covariates, const Eigen::Ref<const Vector>& beta) const {
  return evaluate(covariates, beta).value;
}

}  // namespace efnlm
