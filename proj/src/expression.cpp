#include "fpk/expression.hpp"
#include "fpk/csvio.hpp"
#include "fpk/numerics.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

namespace fpk {

namespace {

using Node = Expression::Node;
using Kind = Node::Kind;

struct Parser {
    const std::string& src;
    int dimension;
    int splitD1;
    size_t at = 0;

    void skip() {
        while (at < src.size() && std::isspace(static_cast<unsigned char>(src[at]))) ++at;
    }
    char peek() {
        skip();
        return at < src.size() ? src[at] : '\0';
    }
    bool consume(char c) {
        if (peek() == c) {
            ++at;
            return true;
        }
        return false;
    }

    Node expression() {
        Node lhs = term();
        while (true) {
            char c = peek();
            if (c != '+' && c != '-') break;
            int pos = static_cast<int>(at);
            ++at;
            Node rhs = term();
            Node n;
            n.kind = Kind::Binary;
            n.op = c;
            n.pos = pos;
            n.args = {std::move(lhs), std::move(rhs)};
            lhs = std::move(n);
        }
        return lhs;
    }

    Node term() {
        Node lhs = unary();
        while (true) {
            char c = peek();
            if (c != '*' && c != '/') break;
            int pos = static_cast<int>(at);
            ++at;
            Node rhs = unary();
            Node n;
            n.kind = Kind::Binary;
            n.op = c;
            n.pos = pos;
            n.args = {std::move(lhs), std::move(rhs)};
            lhs = std::move(n);
        }
        return lhs;
    }

    Node unary() {
        if (peek() == '-') {
            int pos = static_cast<int>(at);
            ++at;
            Node n;
            n.kind = Kind::Unary;
            n.op = '-';
            n.pos = pos;
            n.args.push_back(unary());
            return n;
        }
        return power();
    }

    Node power() {
        Node base = primary();
        if (peek() == '^') {
            int pos = static_cast<int>(at);
            ++at;
            Node exp = unary();   // right-associative, unary exponent allowed
            Node n;
            n.kind = Kind::Binary;
            n.op = '^';
            n.pos = pos;
            n.args = {std::move(base), std::move(exp)};
            return n;
        }
        return base;
    }

    Node primary() {
        char c = peek();
        int pos = static_cast<int>(at);
        if (c == '(') {
            ++at;
            Node inner = expression();
            if (!consume(')')) throw ParseError("unbalanced parentheses", static_cast<int>(at));
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        if (c == '\0') throw ParseError("unexpected end of expression", pos);
        throw ParseError(std::string("unexpected character '") + c + "'", pos);
    }

    Node number() {
        skip();
        size_t start = at;
        while (at < src.size() && std::isdigit(static_cast<unsigned char>(src[at]))) ++at;
        if (at < src.size() && src[at] == '.') {
            ++at;
            while (at < src.size() && std::isdigit(static_cast<unsigned char>(src[at]))) ++at;
        }
        if (at < src.size() && (src[at] == 'e' || src[at] == 'E')) {
            size_t mark = at;
            ++at;
            if (at < src.size() && (src[at] == '+' || src[at] == '-')) ++at;
            if (at < src.size() && std::isdigit(static_cast<unsigned char>(src[at]))) {
                while (at < src.size() && std::isdigit(static_cast<unsigned char>(src[at]))) ++at;
            } else {
                at = mark;   // the 'e' belongs to something else
            }
        }
        double value = 0;
        auto res = std::from_chars(src.data() + start, src.data() + at, value);
        if (res.ec != std::errc() || res.ptr != src.data() + at)
            throw ParseError("malformed number", static_cast<int>(start));
        Node n;
        n.kind = Kind::Number;
        n.number = value;
        n.pos = static_cast<int>(start);
        return n;
    }

    Node identifier() {
        skip();
        size_t start = at;
        while (at < src.size() &&
               (std::isalnum(static_cast<unsigned char>(src[at])) || src[at] == '_'))
            ++at;
        std::string name = src.substr(start, at - start);
        int pos = static_cast<int>(start);

        if (name == "t") {
            Node n;
            n.kind = Kind::Time;
            n.pos = pos;
            return n;
        }
        if (name == "x") {
            Node n;
            n.kind = Kind::Point;
            n.pos = pos;
            return n;
        }
        if (name.size() >= 2 && name[0] == 'x' &&
            std::all_of(name.begin() + 1, name.end(),
                        [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
            int idx = std::stoi(name.substr(1));
            if (idx < 1 || idx > dimension)
                throw ParseError("coordinate " + name + " out of range for dimension " +
                                     std::to_string(dimension),
                                 pos);
            Node n;
            n.kind = Kind::Coord;
            n.coordIndex = idx - 1;
            n.pos = pos;
            return n;
        }

        static const std::map<std::string, int> kArity = {
            {"exp", 1}, {"ln", 1},  {"abs", 1},  {"sqrt", 1}, {"pow", 2},
            {"min", 2}, {"max", 2}, {"norm", 1}, {"norm1", 1}, {"norm2", 1}};
        auto it = kArity.find(name);
        if (it == kArity.end()) throw ParseError("unknown identifier '" + name + "'", pos);
        if (!consume('('))
            throw ParseError("function '" + name + "' expects an argument list", static_cast<int>(at));
        Node n;
        n.kind = Kind::Call;
        n.func = name;
        n.pos = pos;
        n.args.push_back(expression());
        while (consume(',')) n.args.push_back(expression());
        if (!consume(')')) throw ParseError("unbalanced parentheses", static_cast<int>(at));
        if (static_cast<int>(n.args.size()) != it->second)
            throw ParseError("function '" + name + "' expects " + std::to_string(it->second) +
                                 " argument(s)",
                             pos);
        if (name.rfind("norm", 0) == 0) {
            if (n.args[0].kind != Kind::Point)
                throw ParseError("'" + name + "' takes the spatial point x", n.args[0].pos);
            if (name != "norm" && splitD1 <= 0)
                throw ParseError("'" + name + "' requires a declared d1/d2 split", pos);
        }
        return n;
    }
};

struct Evaluator {
    const Eigen::VectorXd& x;
    double t;
    int splitD1;

    double run(const Node& n) const {
        double v = runRaw(n);
        if (!num::isFinite(v)) throw ExprEvalError("expression evaluated to a non-finite value", n.pos);
        return v;
    }

    double runRaw(const Node& n) const {
        switch (n.kind) {
            case Kind::Number: return n.number;
            case Kind::Coord: return x[n.coordIndex];
            case Kind::Time: return t;
            case Kind::Point:
                throw ExprEvalError("the point x can only appear inside norm()", n.pos);
            case Kind::Unary: return -run(n.args[0]);
            case Kind::Binary: {
                double a = run(n.args[0]);
                double b = run(n.args[1]);
                switch (n.op) {
                    case '+': return a + b;
                    case '-': return a - b;
                    case '*': return a * b;
                    case '/':
                        if (b == 0) throw ExprEvalError("division by zero", n.pos);
                        return a / b;
                    case '^': return power(a, b, n.pos);
                }
                throw ExprEvalError("bad operator", n.pos);
            }
            case Kind::Call: {
                const std::string& f = n.func;
                if (f == "norm" || f == "norm1" || f == "norm2") {
                    int lo = 0, hi = static_cast<int>(x.size());
                    if (f == "norm1") hi = splitD1;
                    if (f == "norm2") lo = splitD1;
                    double s = 0;
                    for (int i = lo; i < hi; ++i) s += x[i] * x[i];
                    return std::sqrt(s);
                }
                double a = run(n.args[0]);
                if (f == "exp") return std::exp(a);
                if (f == "ln") {
                    if (!(a > 0)) throw ExprEvalError("ln of a nonpositive value", n.pos);
                    return std::log(a);
                }
                if (f == "abs") return std::abs(a);
                if (f == "sqrt") {
                    if (a < 0) throw ExprEvalError("sqrt of a negative value", n.pos);
                    return std::sqrt(a);
                }
                double b = run(n.args[1]);
                if (f == "pow") return power(a, b, n.pos);
                if (f == "min") return std::min(a, b);
                if (f == "max") return std::max(a, b);
                throw ExprEvalError("bad function", n.pos);
            }
        }
        throw ExprEvalError("bad node", n.pos);
    }

    static double power(double a, double b, int pos) {
        double v = std::pow(a, b);
        if (!num::isFinite(v)) throw ExprEvalError("power evaluated to a non-finite value", pos);
        return v;
    }
};

int precedence(const Node& n) {
    switch (n.kind) {
        case Kind::Binary:
            if (n.op == '+' || n.op == '-') return 1;
            if (n.op == '*' || n.op == '/') return 2;
            return 4;   // '^'
        case Kind::Unary: return 3;
        default: return 5;
    }
}

void render(const Node& n, std::ostream& os) {
    auto child = [&os](const Node& c, int needed) {
        if (precedence(c) < needed) {
            os << '(';
            render(c, os);
            os << ')';
        } else {
            render(c, os);
        }
    };
    switch (n.kind) {
        case Kind::Number: os << io::formatDouble(n.number); return;
        case Kind::Coord: os << 'x' << (n.coordIndex + 1); return;
        case Kind::Time: os << 't'; return;
        case Kind::Point: os << 'x'; return;
        case Kind::Unary:
            os << '-';
            child(n.args[0], 3);
            return;
        case Kind::Binary: {
            int p = precedence(n);
            if (n.op == '^') {
                child(n.args[0], 5);
                os << '^';
                child(n.args[1], 3);
            } else {
                child(n.args[0], p);
                os << n.op;
                child(n.args[1], p + 1);
            }
            return;
        }
        case Kind::Call: {
            os << n.func << '(';
            for (size_t i = 0; i < n.args.size(); ++i) {
                if (i) os << ',';
                render(n.args[i], os);
            }
            os << ')';
            return;
        }
    }
}

bool nodesEqual(const Node& a, const Node& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case Kind::Number: return a.number == b.number;
        case Kind::Coord: return a.coordIndex == b.coordIndex;
        case Kind::Time:
        case Kind::Point: return true;
        case Kind::Unary:
        case Kind::Binary:
            if (a.op != b.op || a.args.size() != b.args.size()) return false;
            break;
        case Kind::Call:
            if (a.func != b.func || a.args.size() != b.args.size()) return false;
            break;
    }
    for (size_t i = 0; i < a.args.size(); ++i)
        if (!nodesEqual(a.args[i], b.args[i])) return false;
    return true;
}

bool nodeUsesTime(const Node& n) {
    if (n.kind == Kind::Time) return true;
    for (const auto& c : n.args)
        if (nodeUsesTime(c)) return true;
    return false;
}

} // namespace

Expression Expression::parse(const std::string& src, int dimension, int d1) {
    if (dimension < 1) throw std::invalid_argument("Expression: dimension must be positive");
    if (d1 != 0 && (d1 < 1 || d1 >= dimension))
        throw std::invalid_argument("Expression: d1 split must satisfy 1 <= d1 < dimension");
    Parser p{src, dimension, d1};
    Expression e;
    e.root_ = p.expression();
    p.skip();
    if (p.at != src.size())
        throw ParseError("unexpected trailing input", static_cast<int>(p.at));
    e.dimension_ = dimension;
    e.splitD1_ = d1;
    return e;
}

double Expression::evaluate(const Eigen::VectorXd& x, double t) const {
    if (x.size() != dimension_)
        throw std::invalid_argument("Expression: point dimension mismatch");
    Evaluator ev{x, t, splitD1_};
    return ev.run(root_);
}

std::string Expression::print() const {
    std::ostringstream os;
    render(root_, os);
    return os.str();
}

bool Expression::timeDependent() const { return nodeUsesTime(root_); }

bool Expression::operator==(const Expression& other) const {
    return dimension_ == other.dimension_ && splitD1_ == other.splitD1_ &&
           nodesEqual(root_, other.root_);
}

} // namespace fpk
