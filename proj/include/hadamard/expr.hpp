#pragma once

#include <cctype>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace hadamard {

struct ExprError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Compiled real expression in the variables t and x.
/// Grammar: sums and products of numbers, t, x, pi, parenthesized terms, powers `^` (right
/// associative), unary signs and calls of sin cos tan exp log sqrt abs sinh cosh tanh.
class Expression {
public:
    Expression() = default;

    static Expression parse(const std::string& text) {
        Parser p{text, 0};
        Expression e;
        e.text_ = text;
        e.root_ = p.sum();
        p.skip();
        if (p.pos != text.size()) p.fail("unexpected trailing input");
        return e;
    }

    [[nodiscard]] double operator()(double t, double x) const {
        if (!root_) throw ExprError("empty expression");
        return root_->eval(t, x);
    }

    /// True when the value depends on t.
    [[nodiscard]] bool uses_time() const { return root_ && root_->uses_t(); }
    [[nodiscard]] const std::string& text() const { return text_; }

private:
    struct Node {
        virtual ~Node() = default;
        [[nodiscard]] virtual double eval(double t, double x) const = 0;
        [[nodiscard]] virtual bool uses_t() const = 0;
    };
    using Ptr = std::shared_ptr<const Node>;

    struct Constant : Node {
        double v;
        explicit Constant(double v_) : v(v_) {}
        double eval(double, double) const override { return v; }
        bool uses_t() const override { return false; }
    };
    struct Variable : Node {
        bool is_t;
        explicit Variable(bool t) : is_t(t) {}
        double eval(double t, double x) const override { return is_t ? t : x; }
        bool uses_t() const override { return is_t; }
    };
    struct Binary : Node {
        char op;
        Ptr a, b;
        Binary(char o, Ptr l, Ptr r) : op(o), a(std::move(l)), b(std::move(r)) {}
        double eval(double t, double x) const override {
            const double l = a->eval(t, x), r = b->eval(t, x);
            switch (op) {
                case '+': return l + r;
                case '-': return l - r;
                case '*': return l * r;
                case '/': return l / r;
                default: return std::pow(l, r);
            }
        }
        bool uses_t() const override { return a->uses_t() || b->uses_t(); }
    };
    struct Call : Node {
        double (*f)(double);
        Ptr arg;
        Call(double (*fn)(double), Ptr a) : f(fn), arg(std::move(a)) {}
        double eval(double t, double x) const override { return f(arg->eval(t, x)); }
        bool uses_t() const override { return arg->uses_t(); }
    };

    struct Parser {
        const std::string& s;
        size_t pos;

        [[noreturn]] void fail(const std::string& what) const {
            throw ExprError(what + " at position " + std::to_string(pos) + " in \"" + s + "\"");
        }
        void skip() {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        }
        bool accept(char c) {
            skip();
            if (pos < s.size() && s[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }
        Ptr sum() {
            Ptr left = product();
            for (;;) {
                if (accept('+')) left = std::make_shared<Binary>('+', left, product());
                else if (accept('-')) left = std::make_shared<Binary>('-', left, product());
                else return left;
            }
        }
        Ptr product() {
            Ptr left = unary();
            for (;;) {
                if (accept('*')) left = std::make_shared<Binary>('*', left, unary());
                else if (accept('/')) left = std::make_shared<Binary>('/', left, unary());
                else return left;
            }
        }
        Ptr unary() {
            if (accept('-')) return std::make_shared<Binary>('-', std::make_shared<Constant>(0.0), unary());
            if (accept('+')) return unary();
            return power();
        }
        Ptr power() {
            Ptr base = atom();
            if (accept('^')) return std::make_shared<Binary>('^', base, unary());
            return base;
        }
        Ptr atom() {
            skip();
            if (pos >= s.size()) fail("unexpected end of expression");
            if (accept('(')) {
                Ptr inner = sum();
                if (!accept(')')) fail("missing ')'");
                return inner;
            }
            const char c = s[pos];
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                size_t used = 0;
                double v = 0;
                try {
                    v = std::stod(s.substr(pos), &used);
                } catch (const std::exception&) {
                    fail("bad number");
                }
                pos += used;
                return std::make_shared<Constant>(v);
            }
            if (std::isalpha(static_cast<unsigned char>(c))) {
                const size_t start = pos;
                while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_')) ++pos;
                const std::string name = s.substr(start, pos - start);
                if (name == "t") return std::make_shared<Variable>(true);
                if (name == "x") return std::make_shared<Variable>(false);
                if (name == "pi") return std::make_shared<Constant>(M_PI);
                static const std::map<std::string, double (*)(double)> fns{
                    {"sin", [](double v) { return std::sin(v); }},   {"cos", [](double v) { return std::cos(v); }},
                    {"tan", [](double v) { return std::tan(v); }},   {"exp", [](double v) { return std::exp(v); }},
                    {"log", [](double v) { return std::log(v); }},   {"sqrt", [](double v) { return std::sqrt(v); }},
                    {"abs", [](double v) { return std::abs(v); }},   {"sinh", [](double v) { return std::sinh(v); }},
                    {"cosh", [](double v) { return std::cosh(v); }}, {"tanh", [](double v) { return std::tanh(v); }}};
                const auto it = fns.find(name);
                if (it == fns.end()) {
                    pos = start;
                    fail("unknown identifier '" + name + "'");
                }
                if (!accept('(')) fail("expected '(' after " + name);
                Ptr arg = sum();
                if (!accept(')')) fail("missing ')'");
                return std::make_shared<Call>(it->second, arg);
            }
            fail(std::string("unexpected character '") + c + "'");
        }
    };

    std::string text_;
    Ptr root_;
};

}  // namespace hadamard
