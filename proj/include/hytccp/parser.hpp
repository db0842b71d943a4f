#pragma once

// Recursive-descent parser for .hyt files. Grammar (EBNF) is documented in docs/grammar.md.

#include "hytccp/ast.hpp"

#include <cctype>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hytccp {

struct ParseError : std::runtime_error {
    int line, column;
    ParseError(int l, int c, const std::string& msg)
        : std::runtime_error(std::to_string(l) + ":" + std::to_string(c) + ": " + msg), line(l), column(c) {}
};

namespace detail {

enum class Tok { Ident, Number, Sym, End };

struct Token {
    Tok kind;
    std::string text;
    int line, column;
};

inline bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
inline bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\''; }

inline std::vector<Token> tokenize(std::string_view src) {
    static const char* symbols[] = {":-", "->", "||", "=<", "<=", ">=", "!=", "\\=", "/\\", "(", ")", "[", "]", "|",
                                    ",", ".", "+", "-", "*", "/", "=", "<", ">", ";", "~", "@", "{", "}"};
    std::vector<Token> out;
    int line = 1, col = 1;
    std::size_t i = 0;
    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k, ++i) {
            if (src[i] == '\n') ++line, col = 1;
            else ++col;
        }
    };
    while (i < src.size()) {
        char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            advance(1);
            continue;
        }
        if (c == '%') {
            while (i < src.size() && src[i] != '\n') advance(1);
            continue;
        }
        int l = line, cl = col;
        if (ident_start(c)) {
            std::size_t j = i;
            while (j < src.size() && ident_char(src[j])) ++j;
            out.push_back({Tok::Ident, std::string(src.substr(i, j - i)), l, cl});
            advance(j - i);
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t j = i;
            while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            if (j + 1 < src.size() && src[j] == '.' && std::isdigit(static_cast<unsigned char>(src[j + 1]))) {
                ++j;
                while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            }
            out.push_back({Tok::Number, std::string(src.substr(i, j - i)), l, cl});
            advance(j - i);
            continue;
        }
        bool matched = false;
        for (const char* s : symbols) {
            std::string_view sv(s);
            if (src.substr(i, sv.size()) == sv) {
                out.push_back({Tok::Sym, std::string(sv), l, cl});
                advance(sv.size());
                matched = true;
                break;
            }
        }
        if (!matched) throw ParseError(l, cl, std::string("unexpected character '") + c + "'");
    }
    out.push_back({Tok::End, "", line, col});
    return out;
}

inline bool is_variable_name(const std::string& s) {
    return !s.empty() && (std::isupper(static_cast<unsigned char>(s[0])) || (s[0] == '_' && s.size() > 1));
}

class Parser {
public:
    Parser(std::vector<Token> toks, const std::map<std::string, Rational>* constants)
        : toks_(std::move(toks)), constants_(constants) {}

    const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
    bool at(std::string_view sym, std::size_t k = 0) const {
        const auto& t = peek(k);
        return (t.kind == Tok::Sym || t.kind == Tok::Ident) && t.text == sym;
    }
    bool at_end() const { return peek().kind == Tok::End; }
    [[noreturn]] void fail(const std::string& msg, const Token* t = nullptr) const {
        const Token& tok = t ? *t : peek();
        throw ParseError(tok.line, tok.column, msg + (tok.kind == Tok::End ? " (at end of input)" : " near '" + tok.text + "'"));
    }
    Token take() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
    void expect(std::string_view sym) {
        if (!at(sym)) fail("expected '" + std::string(sym) + "'");
        take();
    }
    bool accept(std::string_view sym) {
        if (!at(sym)) return false;
        take();
        return true;
    }
    std::size_t mark() const { return pos_; }
    void reset(std::size_t m) { pos_ = m; }

    std::string variable() {
        const auto& t = peek();
        if (t.kind != Tok::Ident || !is_variable_name(t.text)) fail("expected a variable");
        if (constants_ && constants_->count(t.text)) fail("constant used where a variable is expected");
        return take().text;
    }

    // ---- constant arithmetic ----
    Rational cexpr() {
        AffineExpr e = aexpr();
        if (!e.is_constant()) fail("expected a constant expression");
        return e.constant;
    }

    // ---- affine arithmetic over variables ----
    AffineExpr aexpr() {
        AffineExpr acc = aterm();
        while (at("+") || at("-")) {
            bool minus = take().text == "-";
            AffineExpr rhs = aterm();
            acc = add(acc, rhs, minus ? -1 : 1);
        }
        return acc;
    }
    AffineExpr aterm() {
        AffineExpr acc = afactor();
        while (at("*") || at("/")) {
            const Token op = take();
            AffineExpr rhs = afactor();
            if (op.text == "*") {
                if (acc.is_constant()) acc = scale(rhs, acc.constant);
                else if (rhs.is_constant()) acc = scale(acc, rhs.constant);
                else fail("non-linear product", &op);
            } else {
                if (!rhs.is_constant()) fail("division by a variable", &op);
                if (rhs.constant == 0) fail("division by zero", &op);
                acc = scale(acc, Rational(1) / rhs.constant);
            }
        }
        return acc;
    }
    AffineExpr afactor() {
        const Token& t = peek();
        if (accept("-")) return scale(afactor(), -1);
        if (accept("(")) {
            AffineExpr e = aexpr();
            expect(")");
            return e;
        }
        if (t.kind == Tok::Number) return AffineExpr{parse_rational(take().text), {}};
        if (t.kind == Tok::Ident && is_variable_name(t.text)) {
            if (constants_ && constants_->count(t.text)) return AffineExpr{constants_->at(take().text), {}};
            if (!allow_vars_) unknown_constant(t);
            AffineExpr e;
            e.coeffs[take().text] = 1;
            return e;
        }
        if (t.kind == Tok::Ident) unknown_constant(t);
        fail("expected a number");
    }
    [[noreturn]] void unknown_constant(const Token& t) const {
        throw ParseError(t.line, t.column, "unknown constant '" + t.text + "'");
    }
    static AffineExpr scale(AffineExpr e, const Rational& k) {
        e.constant *= k;
        for (auto& [v, c] : e.coeffs) c *= k;
        return e;
    }
    static AffineExpr add(AffineExpr a, const AffineExpr& b, int sign) {
        a.constant += sign * b.constant;
        for (const auto& [v, c] : b.coeffs) {
            a.coeffs[v] += sign * c;
            if (a.coeffs[v] == 0) a.coeffs.erase(v);
        }
        return a;
    }
    AffineExpr expr_with_vars() {
        bool saved = allow_vars_;
        allow_vars_ = true;
        AffineExpr e = aexpr();
        allow_vars_ = saved;
        return e;
    }

    // ---- terms ----
    Term term() {
        const Token& t = peek();
        if (accept("[")) {
            if (accept("]")) return Term::nil();
            std::vector<Term> items{term()};
            while (accept(",")) items.push_back(term());
            Term tail = accept("|") ? term() : Term::nil();
            expect("]");
            for (auto it = items.rbegin(); it != items.rend(); ++it) tail = Term::cons(*it, tail);
            return tail;
        }
        if (t.kind == Tok::Ident && t.text == "_") {
            take();
            return Term::wildcard();
        }
        if (t.kind == Tok::Ident && (t.text == "random" || t.text == "Random") && at("(", 1)) {
            take();
            expect("(");
            Rational lo = cexpr();
            expect(",");
            Rational hi = cexpr();
            expect(")");
            if (lo > hi) fail("random bounds out of order");
            return Term::random(lo, hi);
        }
        if (t.kind == Tok::Ident && is_variable_name(t.text) && !(constants_ && constants_->count(t.text)) &&
            !is_arith_op(peek(1))) {
            return Term::var(take().text);
        }
        if (t.kind == Tok::Ident && !is_variable_name(t.text) && t.text != "_") {
            if (t.text == "true" || t.text == "false") fail("reserved word used as a term");
            return Term::atom(take().text);
        }
        return Term::num(cexpr());
    }
    static bool is_arith_op(const Token& t) {
        return t.kind == Tok::Sym && (t.text == "+" || t.text == "-" || t.text == "*" || t.text == "/");
    }

    // ---- constraints ----
    std::vector<AtomicConstraint> constraint() {
        std::vector<AtomicConstraint> atoms;
        if (accept("true")) return atoms;
        do atoms.push_back(atomic());
        while (accept(",") || accept("/\\"));
        return atoms;
    }
    AtomicConstraint atomic() {
        std::string v = variable();
        const Token op = take();
        if (op.kind != Tok::Sym) fail("expected a comparison operator", &op);
        if (op.text == "=") return TermEq{v, term()};
        CmpOp cmp;
        if (op.text == "!=" || op.text == "\\=") cmp = CmpOp::Ne;
        else if (op.text == "<") cmp = CmpOp::Lt;
        else if (op.text == "=<" || op.text == "<=") cmp = CmpOp::Le;
        else if (op.text == ">") cmp = CmpOp::Gt;
        else if (op.text == ">=") cmp = CmpOp::Ge;
        else fail("expected a comparison operator", &op);
        return LinCmp{v, cmp, cexpr()};
    }

    // ---- agents ----
    Agent agent() {
        Agent acc = choice_or_primary();
        while (accept("||")) acc = Parallel{acc, choice_or_primary()};
        return acc;
    }

    Agent choice_or_primary() {
        if (!at("ask")) return primary();
        Choice c;
        do branch(c);
        while (accept("+"));
        return c;
    }

    void branch(Choice& c) {
        if (!at("ask")) fail("expected an ask branch after '+'");
        take();
        if (accept("~")) {
            expect("(");
            auto inv = constraint();
            expect(")");
            for (const auto& a : inv) {
                bool cont = std::holds_alternative<LinCmp>(a) ||
                            std::get<TermEq>(a).rhs.kind() == TermKind::Num;
                if (!cont) fail("ask~ invariants compare continuous variables with numbers");
            }
            c.invariants.push_back(std::move(inv));
            return;
        }
        expect("(");
        auto guard = constraint();
        expect(")");
        expect("->");
        c.asks.push_back(AskBranch{std::move(guard), primary()});
    }

    Agent primary() {
        const Token& t = peek();
        if (accept("(")) {
            Agent a = agent();
            expect(")");
            return a;
        }
        if (t.kind != Tok::Ident) fail("expected an agent");
        if (t.text == "stop") {
            take();
            return Stop{};
        }
        if (t.text == "tell") {
            take();
            expect("(");
            auto atoms = constraint();
            const Token& close = peek();
            expect(")");
            for (const auto& a : atoms)
                if (auto* eq = std::get_if<TermEq>(&a); eq && eq->rhs.contains(TermKind::Wildcard))
                    fail("wildcard '_' is not allowed in tell", &close);
            return Tell{std::move(atoms)};
        }
        if (t.text == "now") {
            take();
            expect("(");
            auto guard = constraint();
            expect(")");
            expect("then");
            Agent th = primary();
            expect("else");
            return Now{std::move(guard), th, primary()};
        }
        if (t.text == "exists") {
            take();
            std::vector<std::string> vars{variable()};
            while (accept(",")) vars.push_back(variable());
            expect("(");
            Agent body = agent();
            expect(")");
            return Hide{std::move(vars), body, Constraint::top()};
        }
        if (t.text == "change") return change();
        if (t.text == "ask") return choice_or_primary();
        if (is_variable_name(t.text) || t.text == "_") fail("expected an agent");
        Call c{take().text, {}};
        if (accept("(")) {
            if (!at(")")) {
                c.args.push_back(variable());
                while (accept(",")) c.args.push_back(variable());
            }
            expect(")");
        }
        calls_.push_back({c, t.line, t.column});
        return c;
    }

    Agent change() {
        take();
        expect("(");
        std::string var = variable();
        expect(",");
        std::optional<AffineExpr> value;
        if (!accept("_")) value = expr_with_vars();
        expect(",");
        std::optional<FlowSpec> flow;
        if (!accept("_")) {
            const Token& der = peek();
            expect("der");
            expect("(");
            std::string dv = variable();
            if (dv != var) fail("der(" + dv + ") does not match the changed variable " + var, &der);
            expect(")");
            expect("=");
            AffineExpr rhs = expr_with_vars();
            Rational b = 0;
            if (auto it = rhs.coeffs.find(var); it != rhs.coeffs.end()) {
                b = it->second;
                rhs.coeffs.erase(it);
            }
            flow = FlowSpec{std::move(rhs), b};
        }
        expect(")");
        return Change{var, std::move(value), std::move(flow)};
    }

    struct CallSite {
        Call call;
        int line, column;
    };
    std::vector<CallSite> calls_;

private:
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    const std::map<std::string, Rational>* constants_;
    bool allow_vars_ = false;
};

}  // namespace detail

/// Parses a single agent (no constants section, no declarations).
inline Agent parse_agent(std::string_view text, const std::map<std::string, Rational>& constants = {}) {
    detail::Parser p(detail::tokenize(text), &constants);
    Agent a = p.agent();
    p.accept(".");
    if (!p.at_end()) p.fail("trailing input after agent");
    return a;
}

/// Parses a whole program: `const` definitions, then declarations `p(X..) :- A.`, and
/// an optional initial agent (defaults to the zero-arity declaration `init`).
inline Program parse_program(std::string_view text) {
    Program prog;
    detail::Parser p(detail::tokenize(text), &prog.constants);
    while (p.at("const")) {
        p.take();
        const auto& name = p.peek();
        if (name.kind != detail::Tok::Ident || !detail::is_variable_name(name.text))
            p.fail("constant names start with an upper-case letter");
        std::string n = p.take().text;
        if (prog.constants.count(n)) p.fail("constant '" + n + "' defined twice", &name);
        p.expect("=");
        Rational v = p.cexpr();
        p.expect(";");
        prog.constants.emplace(n, v);
    }
    std::optional<Agent> initial;
    int initial_line = 0;
    while (!p.at_end()) {
        // Declaration head lookahead: name [ '(' vars ')' ] ':-'
        std::size_t m = p.mark();
        const auto head = p.peek();
        bool is_decl = false;
        Declaration d;
        if (head.kind == detail::Tok::Ident && !detail::is_variable_name(head.text)) {
            d.name = p.take().text;
            try {
                if (p.accept("(") && !p.accept(")")) {
                    d.params.push_back(p.variable());
                    while (p.accept(",")) d.params.push_back(p.variable());
                    p.expect(")");
                }
                is_decl = p.at(":-");
            } catch (const ParseError&) {
                is_decl = false;
            }
        }
        if (is_decl) {
            p.expect(":-");
            std::set<std::string> seen;
            for (const auto& v : d.params)
                if (!seen.insert(v).second) p.fail("parameter '" + v + "' repeated in " + d.name, &head);
            d.body = p.agent();
            p.expect(".");
            for (const auto& v : free_vars(d.body))
                if (!seen.count(v))
                    throw ParseError(head.line, head.column,
                                     "variable '" + v + "' in " + d.name + " is neither a parameter nor hidden");
            prog.declarations.push_back(std::move(d));
            continue;
        }
        p.reset(m);
        if (initial) p.fail("more than one initial agent");
        initial_line = p.peek().line;
        initial = p.agent();
        if (!p.accept(".") && !p.at_end()) p.fail("expected '.' after the initial agent");
    }
    (void)initial_line;
    for (const auto& site : p.calls_) {
        if (prog.lookup(site.call.name, site.call.args.size()).empty()) {
            bool any = false;
            for (const auto& d : prog.declarations) any = any || d.name == site.call.name;
            throw ParseError(site.line, site.column,
                             any ? "arity mismatch in call to '" + site.call.name + "'"
                                 : "call to undeclared process '" + site.call.name + "'");
        }
    }
    if (initial) prog.initial = *initial;
    else if (!prog.lookup("init", 0).empty()) prog.initial = Call{"init", {}};
    else throw ParseError(1, 1, "program has no initial agent and no 'init' declaration");
    return prog;
}

}  // namespace hytccp
