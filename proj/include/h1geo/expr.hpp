#pragma once

// Tiny expression language over doubles:
//
//   expr   := term (('+' | '-') term)*
//   term   := factor (('*' | '/') factor)*
//   factor := atom ('^' factor)?
//   atom   := number | ident | ident '(' expr ')' | '(' expr ')' | '-' factor
//
// Whitespace is insignificant. "pi" is predefined. Power binds tighter than
// unary minus, so -x^2 means -(x^2). Functions: sin cos tan sec cot csc exp
// ln sqrt tanh atan abs. Parsed expressions are immutable and cheap to copy.
//
// Derivatives come from dual-number evaluation (eval_dual), never from symbolic
// rewriting. A power with a literal integer exponent is computed by repeated
// multiplication and so accepts nonpositive bases; any other power requires a
// positive base.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <initializer_list>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "h1geo/dual.hpp"
#include "h1geo/errors.hpp"

namespace h1geo {

// Variable bindings for evaluation; a handful of names, so linear lookup.
class Bindings {
  public:
    Bindings() = default;
    Bindings(std::initializer_list<std::pair<std::string, double>> init) {
        for (const auto& kv : init) set(kv.first, kv.second);
    }

    void set(std::string_view name, double value) {
        for (auto& kv : items_)
            if (kv.first == name) {
                kv.second = value;
                return;
            }
        items_.emplace_back(std::string(name), value);
    }

    const double* find(std::string_view name) const {
        for (const auto& kv : items_)
            if (kv.first == name) return &kv.second;
        return nullptr;
    }

  private:
    std::vector<std::pair<std::string, double>> items_;
};

namespace detail {

enum class FunId { Sin, Cos, Tan, Sec, Cot, Csc, Exp, Ln, Sqrt, Tanh, Atan, Abs };

inline const char* fun_name(FunId f) {
    switch (f) {
        case FunId::Sin: return "sin";
        case FunId::Cos: return "cos";
        case FunId::Tan: return "tan";
        case FunId::Sec: return "sec";
        case FunId::Cot: return "cot";
        case FunId::Csc: return "csc";
        case FunId::Exp: return "exp";
        case FunId::Ln: return "ln";
        case FunId::Sqrt: return "sqrt";
        case FunId::Tanh: return "tanh";
        case FunId::Atan: return "atan";
        case FunId::Abs: return "abs";
    }
    return "?";
}

inline bool lookup_fun(std::string_view name, FunId& out) {
    static constexpr std::pair<std::string_view, FunId> table[] = {
        {"sin", FunId::Sin},   {"cos", FunId::Cos},  {"tan", FunId::Tan},
        {"sec", FunId::Sec},   {"cot", FunId::Cot},  {"csc", FunId::Csc},
        {"exp", FunId::Exp},   {"ln", FunId::Ln},    {"sqrt", FunId::Sqrt},
        {"tanh", FunId::Tanh}, {"atan", FunId::Atan}, {"abs", FunId::Abs},
    };
    for (const auto& [n, id] : table)
        if (n == name) {
            out = id;
            return true;
        }
    return false;
}

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
    enum class Kind { Num, Pi, Var, Add, Sub, Mul, Div, Pow, Neg, Fun };
    Kind kind;
    double num = 0.0;      // Kind::Num
    std::string name;      // Kind::Var
    FunId fun = FunId::Sin;  // Kind::Fun
    NodePtr a, b;
    std::size_t begin = 0, end = 0;  // byte span in source
};

}  // namespace detail

class Expression {
  public:
    Expression() = default;

    bool valid() const { return static_cast<bool>(root_); }
    const std::string& source() const { return *src_; }

    std::string subexpression(const detail::Node& n) const {
        return src_->substr(n.begin, n.end - n.begin);
    }

    double eval(const Bindings& b) const {
        require_valid();
        return eval_node<double>(*root_, [&](const detail::Node& n) -> double {
            const double* v = b.find(n.name);
            if (!v) throw EvalError("unbound variable", subexpression(n));
            return *v;
        });
    }

    // Dual evaluation: every variable named in `seeds` gets derivative part 1,
    // so the result differentiates along the sum of those coordinate directions.
    Dual eval_dual(const Bindings& b, std::initializer_list<std::string_view> seeds) const {
        require_valid();
        return eval_node<Dual>(*root_, [&](const detail::Node& n) -> Dual {
            const double* v = b.find(n.name);
            if (!v) throw EvalError("unbound variable", subexpression(n));
            for (std::string_view s : seeds)
                if (s == n.name) return Dual::variable(*v);
            return Dual::constant(*v);
        });
    }

    Dual eval_dual(const Bindings& b, std::string_view seed) const { return eval_dual(b, {seed}); }

    // Fully parenthesized form; parse(to_string()) evaluates identically.
    std::string to_string() const {
        require_valid();
        std::string out;
        print(*root_, out);
        return out;
    }

    std::vector<std::string> free_variables() const {
        require_valid();
        std::vector<std::string> names;
        collect_vars(*root_, names);
        return names;
    }

    static Expression parse(const std::string& src);

  private:
    detail::NodePtr root_;
    std::shared_ptr<const std::string> src_;

    Expression(detail::NodePtr root, std::shared_ptr<const std::string> src)
        : root_(std::move(root)), src_(std::move(src)) {}

    void require_valid() const {
        if (!root_) throw PreconditionError("empty expression");
    }

    template <class T, class VarFn>
    T eval_node(const detail::Node& n, const VarFn& var) const {
        using detail::Node;
        switch (n.kind) {
            case Node::Kind::Num: return T(n.num);
            case Node::Kind::Pi: return T(std::numbers::pi);
            case Node::Kind::Var: return var(n);
            case Node::Kind::Add: return eval_node<T>(*n.a, var) + eval_node<T>(*n.b, var);
            case Node::Kind::Sub: return eval_node<T>(*n.a, var) - eval_node<T>(*n.b, var);
            case Node::Kind::Mul: return eval_node<T>(*n.a, var) * eval_node<T>(*n.b, var);
            case Node::Kind::Div: {
                T num = eval_node<T>(*n.a, var);
                T den = eval_node<T>(*n.b, var);
                if (value_of(den) == 0.0) throw EvalError("division by zero", subexpression(n));
                return num / den;
            }
            case Node::Kind::Pow: return eval_pow<T>(n, var);
            case Node::Kind::Neg: return -eval_node<T>(*n.a, var);
            case Node::Kind::Fun: return eval_fun<T>(n, var);
        }
        throw Error("corrupt expression node");
    }

    static double value_of(double x) { return x; }
    static double value_of(const Dual& x) { return x.v; }

    static double as_double(double x) { return x; }
    static Dual as_double(const Dual&) = delete;

    template <class T, class VarFn>
    T eval_pow(const detail::Node& n, const VarFn& var) const {
        T base = eval_node<T>(*n.a, var);
        // Literal integer exponent: exact repeated multiplication.
        if (n.b->kind == detail::Node::Kind::Num) {
            double e = n.b->num;
            long long k = static_cast<long long>(std::llround(e));
            if (e == static_cast<double>(k) && std::abs(e) < 1e9) {
                if (k < 0 && value_of(base) == 0.0)
                    throw EvalError("division by zero", subexpression(n));
                return pow_int(base, k);
            }
        }
        T expo = eval_node<T>(*n.b, var);
        if (!(value_of(base) > 0.0))
            throw EvalError("power of nonpositive base with non-integer exponent",
                            subexpression(n));
        using h1geo::exp;
        using h1geo::ln;
        using std::exp;
        using std::log;
        return pow_general(base, expo);
    }

    static double pow_int(double b, long long k) { return std::pow(b, static_cast<double>(k)); }
    static Dual pow_int(const Dual& b, long long k) { return powi(b, k); }
    static double pow_general(double b, double e) { return std::pow(b, e); }
    static Dual pow_general(const Dual& b, const Dual& e) { return exp(e * ln(b)); }

    template <class T, class VarFn>
    T eval_fun(const detail::Node& n, const VarFn& var) const {
        using detail::FunId;
        T u = eval_node<T>(*n.a, var);
        switch (n.fun) {
            case FunId::Sin: return apply_sin(u);
            case FunId::Cos: return apply_cos(u);
            case FunId::Tan: return apply_tan(u);
            case FunId::Sec: return apply_sec(u);
            case FunId::Cot: return apply_cot(u);
            case FunId::Csc: return apply_csc(u);
            case FunId::Exp: return apply_exp(u);
            case FunId::Ln:
                if (!(value_of(u) > 0.0)) throw EvalError("ln of nonpositive value", subexpression(n));
                return apply_ln(u);
            case FunId::Sqrt:
                if (value_of(u) < 0.0) throw EvalError("sqrt of negative value", subexpression(n));
                return apply_sqrt(u);
            case FunId::Tanh: return apply_tanh(u);
            case FunId::Atan: return apply_atan(u);
            case FunId::Abs: return apply_abs(u);
        }
        throw Error("corrupt expression node");
    }

    static double apply_sin(double u) { return std::sin(u); }
    static double apply_cos(double u) { return std::cos(u); }
    static double apply_tan(double u) { return std::tan(u); }
    static double apply_sec(double u) { return 1.0 / std::cos(u); }
    static double apply_cot(double u) { return 1.0 / std::tan(u); }
    static double apply_csc(double u) { return 1.0 / std::sin(u); }
    static double apply_exp(double u) { return std::exp(u); }
    static double apply_ln(double u) { return std::log(u); }
    static double apply_sqrt(double u) { return std::sqrt(u); }
    static double apply_tanh(double u) { return std::tanh(u); }
    static double apply_atan(double u) { return std::atan(u); }
    static double apply_abs(double u) { return std::abs(u); }
    static Dual apply_sin(const Dual& u) { return sin(u); }
    static Dual apply_cos(const Dual& u) { return cos(u); }
    static Dual apply_tan(const Dual& u) { return tan(u); }
    static Dual apply_sec(const Dual& u) { return sec(u); }
    static Dual apply_cot(const Dual& u) { return cot(u); }
    static Dual apply_csc(const Dual& u) { return csc(u); }
    static Dual apply_exp(const Dual& u) { return exp(u); }
    static Dual apply_ln(const Dual& u) { return ln(u); }
    static Dual apply_sqrt(const Dual& u) { return sqrt(u); }
    static Dual apply_tanh(const Dual& u) { return tanh(u); }
    static Dual apply_atan(const Dual& u) { return atan(u); }
    static Dual apply_abs(const Dual& u) { return abs(u); }

    static void print(const detail::Node& n, std::string& out) {
        using detail::Node;
        char buf[40];
        switch (n.kind) {
            case Node::Kind::Num:
                std::snprintf(buf, sizeof buf, "%.17g", n.num);
                out += buf;
                return;
            case Node::Kind::Pi: out += "pi"; return;
            case Node::Kind::Var: out += n.name; return;
            case Node::Kind::Add: print_binary(n, '+', out); return;
            case Node::Kind::Sub: print_binary(n, '-', out); return;
            case Node::Kind::Mul: print_binary(n, '*', out); return;
            case Node::Kind::Div: print_binary(n, '/', out); return;
            case Node::Kind::Pow: print_binary(n, '^', out); return;
            case Node::Kind::Neg:
                out += "(-";
                print(*n.a, out);
                out += ')';
                return;
            case Node::Kind::Fun:
                out += detail::fun_name(n.fun);
                out += '(';
                print(*n.a, out);
                out += ')';
                return;
        }
    }

    static void print_binary(const detail::Node& n, char op, std::string& out) {
        out += '(';
        print(*n.a, out);
        out += op;
        print(*n.b, out);
        out += ')';
    }

    static void collect_vars(const detail::Node& n, std::vector<std::string>& names) {
        if (n.kind == detail::Node::Kind::Var) {
            for (const auto& s : names)
                if (s == n.name) return;
            names.push_back(n.name);
            return;
        }
        if (n.a) collect_vars(*n.a, names);
        if (n.b) collect_vars(*n.b, names);
    }

    friend class ExpressionParser;
};

class ExpressionParser {
  public:
    explicit ExpressionParser(std::shared_ptr<const std::string> src) : src_(std::move(src)) {}

    Expression run() {
        pos_ = 0;
        detail::NodePtr root = parse_expr();
        skip_ws();
        if (pos_ != src_->size()) throw ParseError(pos_, "end of input");
        return Expression(std::move(root), src_);
    }

  private:
    std::shared_ptr<const std::string> src_;
    std::size_t pos_ = 0;

    const std::string& s() const { return *src_; }

    void skip_ws() {
        while (pos_ < s().size() && (s()[pos_] == ' ' || s()[pos_] == '\t' || s()[pos_] == '\n' ||
                                     s()[pos_] == '\r'))
            ++pos_;
    }

    bool peek_is(char c) {
        skip_ws();
        return pos_ < s().size() && s()[pos_] == c;
    }

    bool accept(char c) {
        if (peek_is(c)) {
            ++pos_;
            return true;
        }
        return false;
    }

    detail::NodePtr make(detail::Node&& n) { return std::make_shared<detail::Node>(std::move(n)); }

    detail::NodePtr binary(detail::Node::Kind k, detail::NodePtr a, detail::NodePtr b) {
        detail::Node n;
        n.kind = k;
        n.begin = a->begin;
        n.end = b->end;
        n.a = std::move(a);
        n.b = std::move(b);
        return make(std::move(n));
    }

    detail::NodePtr parse_expr() {
        detail::NodePtr node = parse_term();
        for (;;) {
            if (accept('+'))
                node = binary(detail::Node::Kind::Add, node, parse_term());
            else if (accept('-'))
                node = binary(detail::Node::Kind::Sub, node, parse_term());
            else
                return node;
        }
    }

    detail::NodePtr parse_term() {
        detail::NodePtr node = parse_factor();
        for (;;) {
            if (accept('*'))
                node = binary(detail::Node::Kind::Mul, node, parse_factor());
            else if (accept('/'))
                node = binary(detail::Node::Kind::Div, node, parse_factor());
            else
                return node;
        }
    }

    detail::NodePtr parse_factor() {
        detail::NodePtr node = parse_atom();
        if (accept('^')) return binary(detail::Node::Kind::Pow, node, parse_factor());
        return node;
    }

    detail::NodePtr parse_atom() {
        skip_ws();
        if (pos_ >= s().size()) throw ParseError(pos_, "a number, identifier, '(' or '-'");
        const char c = s()[pos_];
        if (c == '-') {
            std::size_t begin = pos_++;
            detail::NodePtr inner = parse_factor();
            detail::Node n;
            n.kind = detail::Node::Kind::Neg;
            n.begin = begin;
            n.end = inner->end;
            n.a = std::move(inner);
            return make(std::move(n));
        }
        if (c == '(') {
            std::size_t begin = pos_++;
            detail::NodePtr inner = parse_expr();
            skip_ws();
            if (!accept(')')) throw ParseError(pos_, "')'");
            detail::Node n(*inner);
            n.begin = begin;
            n.end = pos_;
            return make(std::move(n));
        }
        if (is_digit(c) || c == '.') return parse_number();
        if (is_alpha(c)) return parse_ident();
        throw ParseError(pos_, "a number, identifier, '(' or '-'");
    }

    static bool is_digit(char c) { return c >= '0' && c <= '9'; }
    static bool is_alpha(char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
    }
    static bool is_alnum(char c) { return is_digit(c) || is_alpha(c); }

    detail::NodePtr parse_number() {
        const std::size_t begin = pos_;
        bool digits = false;
        while (pos_ < s().size() && is_digit(s()[pos_])) ++pos_, digits = true;
        if (pos_ < s().size() && s()[pos_] == '.') {
            ++pos_;
            while (pos_ < s().size() && is_digit(s()[pos_])) ++pos_, digits = true;
        }
        if (!digits) throw ParseError(begin, "a number");
        if (pos_ < s().size() && (s()[pos_] == 'e' || s()[pos_] == 'E')) {
            std::size_t mark = pos_++;
            if (pos_ < s().size() && (s()[pos_] == '+' || s()[pos_] == '-')) ++pos_;
            if (pos_ < s().size() && is_digit(s()[pos_])) {
                while (pos_ < s().size() && is_digit(s()[pos_])) ++pos_;
            } else {
                pos_ = mark;  // 'e' belongs to something else ("2e" is "2 * e"? no: error later)
            }
        }
        detail::Node n;
        n.kind = detail::Node::Kind::Num;
        n.num = std::strtod(s().c_str() + begin, nullptr);
        n.begin = begin;
        n.end = pos_;
        return make(std::move(n));
    }

    detail::NodePtr parse_ident() {
        const std::size_t begin = pos_;
        while (pos_ < s().size() && is_alnum(s()[pos_])) ++pos_;
        std::string name = s().substr(begin, pos_ - begin);
        const std::size_t after_name = pos_;
        if (name == "pi") {
            detail::Node n;
            n.kind = detail::Node::Kind::Pi;
            n.begin = begin;
            n.end = after_name;
            return make(std::move(n));
        }
        if (peek_is('(')) {
            detail::FunId fun;
            if (!detail::lookup_fun(name, fun)) throw ParseError(begin, "a known function name");
            ++pos_;  // '('
            detail::NodePtr arg = parse_expr();
            skip_ws();
            if (!accept(')')) throw ParseError(pos_, "')'");
            detail::Node n;
            n.kind = detail::Node::Kind::Fun;
            n.fun = fun;
            n.begin = begin;
            n.end = pos_;
            n.a = std::move(arg);
            return make(std::move(n));
        }
        detail::Node n;
        n.kind = detail::Node::Kind::Var;
        n.name = std::move(name);
        n.begin = begin;
        n.end = after_name;
        return make(std::move(n));
    }
};

inline Expression Expression::parse(const std::string& src) {
    return ExpressionParser(std::make_shared<const std::string>(src)).run();
}

inline Expression parse_expression(const std::string& src) { return Expression::parse(src); }

// ---- jets -------------------------------------------------------------

struct Jet2_1 {
    double f = 0.0, d = 0.0, dd = 0.0;
};

struct Jet2_2 {
    double f = 0.0, fu = 0.0, fv = 0.0, fuu = 0.0, fuv = 0.0, fvv = 0.0;
};

struct Jet2_3 {
    double f = 0.0;
    double fx = 0.0, fy = 0.0, ft = 0.0;
    double fxx = 0.0, fxy = 0.0, fxt = 0.0, fyy = 0.0, fyt = 0.0, ftt = 0.0;
};

inline Jet2_1 eval_jet2(const Expression& e, const Bindings& b, std::string_view seed) {
    Dual r = e.eval_dual(b, seed);
    return {r.v, r.d, r.dd};
}

// Full 2-jet from three dual sweeps; the (1,1)-direction sweep recovers the
// mixed derivative exactly: D^2_{u+v} = fuu + 2 fuv + fvv.
inline Jet2_2 eval_jet2(const Expression& e, const Bindings& b, std::string_view nu,
                        std::string_view nv) {
    Dual du = e.eval_dual(b, {nu});
    Dual dv = e.eval_dual(b, {nv});
    Dual dm = e.eval_dual(b, {nu, nv});
    Jet2_2 j;
    j.f = du.v;
    j.fu = du.d;
    j.fv = dv.d;
    j.fuu = du.dd;
    j.fvv = dv.dd;
    j.fuv = 0.5 * (dm.dd - du.dd - dv.dd);
    return j;
}

inline Jet2_3 eval_jet2(const Expression& e, const Bindings& b, std::string_view nx,
                        std::string_view ny, std::string_view nt) {
    Dual dx = e.eval_dual(b, {nx});
    Dual dy = e.eval_dual(b, {ny});
    Dual dt = e.eval_dual(b, {nt});
    Dual dxy = e.eval_dual(b, {nx, ny});
    Dual dxt = e.eval_dual(b, {nx, nt});
    Dual dyt = e.eval_dual(b, {ny, nt});
    Jet2_3 j;
    j.f = dx.v;
    j.fx = dx.d;
    j.fy = dy.d;
    j.ft = dt.d;
    j.fxx = dx.dd;
    j.fyy = dy.dd;
    j.ftt = dt.dd;
    j.fxy = 0.5 * (dxy.dd - dx.dd - dy.dd);
    j.fxt = 0.5 * (dxt.dd - dx.dd - dt.dd);
    j.fyt = 0.5 * (dyt.dd - dy.dd - dt.dd);
    return j;
}

}  // namespace h1geo
