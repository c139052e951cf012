#include "stackel/expr.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_interp.h>
#include <gsl/gsl_spline.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stk {

using nlohmann::json;

namespace {

class ConstNode : public Node {
public:
    explicit ConstNode(double c) : c_(c) {}
    double value(double) const override { return c_; }
    Jet jet(double) const override { return Jet::constant(c_); }
    json to_json() const override { return {{"op", "const"}, {"v", c_}}; }
    bool is_constant() const override { return true; }
    double c_;
};

class VarNode : public Node {
public:
    double value(double x) const override { return x; }
    Jet jet(double x) const override { return Jet::variable(x); }
    json to_json() const override { return {{"op", "x"}}; }
};

enum class BinOp { Add, Sub, Mul, Div };

const char* binop_name(BinOp op) {
    switch (op) {
        case BinOp::Add: return "add";
        case BinOp::Sub: return "sub";
        case BinOp::Mul: return "mul";
        case BinOp::Div: return "div";
    }
    return "";
}

class BinaryNode : public Node {
public:
    BinaryNode(BinOp op, Expr a, Expr b) : op_(op), a_(std::move(a)), b_(std::move(b)) {}
    double value(double x) const override {
        double u = a_(x), v = b_(x);
        switch (op_) {
            case BinOp::Add: return u + v;
            case BinOp::Sub: return u - v;
            case BinOp::Mul: return u * v;
            case BinOp::Div: return u / v;
        }
        return 0.0;
    }
    Jet jet(double x) const override {
        Jet u = a_.jet(x), v = b_.jet(x);
        switch (op_) {
            case BinOp::Add: return u + v;
            case BinOp::Sub: return u - v;
            case BinOp::Mul: return u * v;
            case BinOp::Div: return u / v;
        }
        return {};
    }
    json to_json() const override { return {{"op", binop_name(op_)}, {"args", {a_.to_json(), b_.to_json()}}}; }
    bool serializable() const override { return a_.serializable() && b_.serializable(); }
    bool is_constant() const override { return a_.is_constant() && b_.is_constant(); }
    BinOp op_;
    Expr a_, b_;
};

enum class UnOp { Neg, Sqrt, Exp, Log, Sin, Cos, Bump };

const char* unop_name(UnOp op) {
    switch (op) {
        case UnOp::Neg: return "neg";
        case UnOp::Sqrt: return "sqrt";
        case UnOp::Exp: return "exp";
        case UnOp::Log: return "log";
        case UnOp::Sin: return "sin";
        case UnOp::Cos: return "cos";
        case UnOp::Bump: return "bump";
    }
    return "";
}

Jet bump_jet(const Jet& u) {
    if (std::abs(u.v) >= 1.0) return {};
    Jet g = -1.0 / (1.0 - u * u);
    return exp(g);
}

class UnaryNode : public Node {
public:
    UnaryNode(UnOp op, Expr a) : op_(op), a_(std::move(a)) {}
    double value(double x) const override {
        double u = a_(x);
        switch (op_) {
            case UnOp::Neg: return -u;
            case UnOp::Sqrt: return std::sqrt(u);
            case UnOp::Exp: return std::exp(u);
            case UnOp::Log: return std::log(u);
            case UnOp::Sin: return std::sin(u);
            case UnOp::Cos: return std::cos(u);
            case UnOp::Bump: return std::abs(u) < 1.0 ? std::exp(-1.0 / (1.0 - u * u)) : 0.0;
        }
        return 0.0;
    }
    Jet jet(double x) const override {
        Jet u = a_.jet(x);
        switch (op_) {
            case UnOp::Neg: return -u;
            case UnOp::Sqrt: return sqrt(u);
            case UnOp::Exp: return exp(u);
            case UnOp::Log: return log(u);
            case UnOp::Sin: return sin(u);
            case UnOp::Cos: return cos(u);
            case UnOp::Bump: return bump_jet(u);
        }
        return {};
    }
    json to_json() const override { return {{"op", unop_name(op_)}, {"arg", a_.to_json()}}; }
    bool serializable() const override { return a_.serializable(); }
    bool is_constant() const override { return a_.is_constant(); }
    UnOp op_;
    Expr a_;
};

class PowNode : public Node {
public:
    PowNode(Expr a, double p) : a_(std::move(a)), p_(p) {}
    double value(double x) const override { return std::pow(a_(x), p_); }
    Jet jet(double x) const override { return pow(a_.jet(x), p_); }
    json to_json() const override { return {{"op", "pow"}, {"p", p_}, {"arg", a_.to_json()}}; }
    bool serializable() const override { return a_.serializable(); }
    bool is_constant() const override { return a_.is_constant(); }
    Expr a_;
    double p_;
};

class ComposeNode : public Node {
public:
    ComposeNode(Expr f, Expr g) : f_(std::move(f)), g_(std::move(g)) {}
    double value(double x) const override { return f_(g_(x)); }
    Jet jet(double x) const override {
        Jet g = g_.jet(x);
        Jet f = f_.jet(g.v);
        return chain(g, f.v, f.d1, f.d2);
    }
    json to_json() const override { return {{"op", "compose"}, {"f", f_.to_json()}, {"g", g_.to_json()}}; }
    bool serializable() const override { return f_.serializable() && g_.serializable(); }
    bool is_constant() const override { return f_.is_constant() || g_.is_constant(); }
    Expr f_, g_;
};

class CallableNode : public Node {
public:
    explicit CallableNode(std::function<double(double)> f) : f_(std::move(f)) {}
    double value(double x) const override { return f_(x); }
    Jet jet(double x) const override { return finite_difference_jet(f_, x); }
    json to_json() const override { throw std::logic_error("callable expressions are not serializable"); }
    bool serializable() const override { return false; }
    std::function<double(double)> f_;
};

struct SplineDeleter {
    void operator()(gsl_spline* s) const { gsl_spline_free(s); }
};

class SplineNode : public Node {
public:
    SplineNode(std::vector<double> knots, std::vector<double> values, bool periodic, int deriv)
        : knots_(std::move(knots)), values_(std::move(values)), periodic_(periodic), deriv_(deriv) {
        if (knots_.size() != values_.size() || knots_.size() < 4)
            throw std::invalid_argument("spline needs at least 4 knots with matching values");
        if (!std::is_sorted(knots_.begin(), knots_.end()) ||
            std::adjacent_find(knots_.begin(), knots_.end()) != knots_.end())
            throw std::invalid_argument("spline knots must be strictly increasing");
        if (periodic_ && values_.front() != values_.back())
            throw std::invalid_argument("periodic spline requires equal end values");
        if (deriv_ < 0 || deriv_ > 1) throw std::invalid_argument("spline derivative order must be 0 or 1");
        gsl_set_error_handler_off();
        const gsl_interp_type* type = periodic_ ? gsl_interp_cspline_periodic : gsl_interp_cspline;
        spline_.reset(gsl_spline_alloc(type, knots_.size()));
        gsl_spline_init(spline_.get(), knots_.data(), values_.data(), knots_.size());
        d2_.resize(knots_.size());
        for (size_t i = 0; i < knots_.size(); ++i) d2_[i] = gsl_spline_eval_deriv2(spline_.get(), knots_[i], nullptr);
    }

    double wrap(double x) const {
        double a = knots_.front(), b = knots_.back();
        if (!periodic_) return std::clamp(x, a, b);
        double p = b - a;
        double t = std::fmod(x - a, p);
        if (t < 0) t += p;
        return a + t;
    }

    double third(double x) const {
        size_t i = gsl_interp_bsearch(knots_.data(), x, 0, knots_.size() - 1);
        return (d2_[i + 1] - d2_[i]) / (knots_[i + 1] - knots_[i]);
    }

    double value(double x) const override {
        double t = wrap(x);
        return deriv_ == 0 ? gsl_spline_eval(spline_.get(), t, nullptr) : gsl_spline_eval_deriv(spline_.get(), t, nullptr);
    }

    Jet jet(double x) const override {
        double t = wrap(x);
        double s0 = gsl_spline_eval(spline_.get(), t, nullptr);
        double s1 = gsl_spline_eval_deriv(spline_.get(), t, nullptr);
        double s2 = gsl_spline_eval_deriv2(spline_.get(), t, nullptr);
        if (deriv_ == 0) return {s0, s1, s2};
        return {s1, s2, third(t)};
    }

    json to_json() const override {
        return {{"op", "spline"}, {"periodic", periodic_}, {"deriv", deriv_}, {"knots", knots_}, {"values", values_}};
    }

    std::vector<double> knots_, values_, d2_;
    bool periodic_;
    int deriv_;
    std::unique_ptr<gsl_spline, SplineDeleter> spline_;
};

Expr unary(UnOp op, const Expr& a) { return Expr(std::make_shared<UnaryNode>(op, a)); }
Expr binary(BinOp op, const Expr& a, const Expr& b) { return Expr(std::make_shared<BinaryNode>(op, a, b)); }

}  // namespace

Expr::Expr() : node_(std::make_shared<ConstNode>(0.0)) {}
Expr::Expr(double c) : node_(std::make_shared<ConstNode>(c)) {}

Expr Expr::x() { return Expr(std::make_shared<VarNode>()); }

Expr Expr::callable(std::function<double(double)> f) { return Expr(std::make_shared<CallableNode>(std::move(f))); }

Expr Expr::spline(std::vector<double> knots, std::vector<double> values, bool periodic, int deriv) {
    return Expr(std::make_shared<SplineNode>(std::move(knots), std::move(values), periodic, deriv));
}

double Expr::operator()(double x) const { return node_->value(x); }
Jet Expr::jet(double x) const { return node_->jet(x); }

Expr Expr::compose(const Expr& inner) const { return Expr(std::make_shared<ComposeNode>(*this, inner)); }

bool Expr::serializable() const { return node_->serializable(); }
bool Expr::is_constant() const { return node_->is_constant(); }

double Expr::constant_value() const {
    if (!is_constant()) throw std::logic_error("expression is not constant");
    return node_->value(0.0);
}

json Expr::to_json() const { return node_->to_json(); }

Expr Expr::from_json(const json& j) {
    const std::string op = j.at("op").get<std::string>();
    if (op == "const") return Expr(j.at("v").get<double>());
    if (op == "x") return Expr::x();
    if (op == "add" || op == "sub" || op == "mul" || op == "div") {
        const auto& args = j.at("args");
        if (args.size() != 2) throw std::invalid_argument("binary expression needs two arguments");
        Expr a = from_json(args[0]), b = from_json(args[1]);
        BinOp bop = op == "add" ? BinOp::Add : op == "sub" ? BinOp::Sub : op == "mul" ? BinOp::Mul : BinOp::Div;
        return binary(bop, a, b);
    }
    static const std::pair<const char*, UnOp> unops[] = {{"neg", UnOp::Neg}, {"sqrt", UnOp::Sqrt}, {"exp", UnOp::Exp},
                                                         {"log", UnOp::Log}, {"sin", UnOp::Sin},   {"cos", UnOp::Cos},
                                                         {"bump", UnOp::Bump}};
    for (const auto& [name, uop] : unops)
        if (op == name) return unary(uop, from_json(j.at("arg")));
    if (op == "pow") return pow(from_json(j.at("arg")), j.at("p").get<double>());
    if (op == "compose") return from_json(j.at("f")).compose(from_json(j.at("g")));
    if (op == "spline")
        return spline(j.at("knots").get<std::vector<double>>(), j.at("values").get<std::vector<double>>(),
                      j.at("periodic").get<bool>(), j.value("deriv", 0));
    throw std::invalid_argument("unknown expression op: " + op);
}

Expr operator+(const Expr& a, const Expr& b) { return binary(BinOp::Add, a, b); }
Expr operator-(const Expr& a, const Expr& b) { return binary(BinOp::Sub, a, b); }
Expr operator*(const Expr& a, const Expr& b) { return binary(BinOp::Mul, a, b); }
Expr operator/(const Expr& a, const Expr& b) { return binary(BinOp::Div, a, b); }
Expr operator-(const Expr& a) { return unary(UnOp::Neg, a); }

Expr sqrt(const Expr& a) { return unary(UnOp::Sqrt, a); }
Expr exp(const Expr& a) { return unary(UnOp::Exp, a); }
Expr log(const Expr& a) { return unary(UnOp::Log, a); }
Expr sin(const Expr& a) { return unary(UnOp::Sin, a); }
Expr cos(const Expr& a) { return unary(UnOp::Cos, a); }
Expr pow(const Expr& a, double p) { return Expr(std::make_shared<PowNode>(a, p)); }
Expr bump(const Expr& u) { return unary(UnOp::Bump, u); }

Jet finite_difference_jet(const std::function<double(double)>& f, double x) {
    double h = std::max(1e-5, 1e-4 * std::abs(x));
    double f0 = f(x);
    auto d1 = [&](double s) { return (f(x + s) - f(x - s)) / (2.0 * s); };
    auto d2 = [&](double s) { return (f(x + s) - 2.0 * f0 + f(x - s)) / (s * s); };
    double a1 = d1(h), b1 = d1(0.5 * h);
    double a2 = d2(h), b2 = d2(0.5 * h);
    return {f0, (4.0 * b1 - a1) / 3.0, (4.0 * b2 - a2) / 3.0};
}

}  // namespace stk
