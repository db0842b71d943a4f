#pragma once

#include "hytccp/number.hpp"

#include <memory>
#include <set>
#include <string>
#include <vector>

namespace hytccp {

enum class TermKind { Var, Atom, Num, Cons, Wildcard, Random };

/// Immutable first-order term. Streams are cons chains whose tail may be a variable;
/// the empty list is the atom "[]". Random only occurs inside tell and is drawn when told.
class Term {
public:
    static Term var(std::string name) { return Term(make(TermKind::Var, std::move(name))); }
    static Term atom(std::string symbol) { return Term(make(TermKind::Atom, std::move(symbol))); }
    static Term nil() { return atom("[]"); }
    static Term num(Rational value) {
        auto n = make(TermKind::Num, {});
        n->value = std::move(value);
        return Term(std::move(n));
    }
    static Term cons(Term head, Term tail) {
        auto n = make(TermKind::Cons, {});
        n->head = std::move(head.node_);
        n->tail = std::move(tail.node_);
        return Term(std::move(n));
    }
    static Term wildcard() { return Term(make(TermKind::Wildcard, "_")); }
    static Term random(Rational lo, Rational hi) {
        auto n = make(TermKind::Random, {});
        n->value = std::move(lo);
        n->hi = std::move(hi);
        return Term(std::move(n));
    }

    TermKind kind() const { return node_->kind; }
    bool is_var() const { return kind() == TermKind::Var; }
    const std::string& name() const { return node_->name; }
    const Rational& value() const { return node_->value; }
    const Rational& random_lo() const { return node_->value; }
    const Rational& random_hi() const { return node_->hi; }
    Term head() const { return Term(node_->head); }
    Term tail() const { return Term(node_->tail); }

    friend bool operator==(const Term& a, const Term& b) {
        if (a.node_ == b.node_) return true;
        if (a.kind() != b.kind()) return false;
        switch (a.kind()) {
            case TermKind::Var:
            case TermKind::Atom: return a.name() == b.name();
            case TermKind::Num: return a.value() == b.value();
            case TermKind::Cons: return a.head() == b.head() && a.tail() == b.tail();
            case TermKind::Wildcard: return true;
            case TermKind::Random: return a.random_lo() == b.random_lo() && a.random_hi() == b.random_hi();
        }
        return false;
    }

    bool contains_var(const std::string& v) const {
        switch (kind()) {
            case TermKind::Var: return name() == v;
            case TermKind::Cons: return head().contains_var(v) || tail().contains_var(v);
            default: return false;
        }
    }

    bool contains(TermKind k) const {
        if (kind() == k) return true;
        return kind() == TermKind::Cons && (head().contains(k) || tail().contains(k));
    }

    void collect_vars(std::set<std::string>& out) const {
        if (is_var()) out.insert(name());
        else if (kind() == TermKind::Cons) {
            head().collect_vars(out);
            tail().collect_vars(out);
        }
    }

    /// Replaces every occurrence of variable `from` by `to`.
    Term substitute(const std::string& from, const Term& to) const {
        switch (kind()) {
            case TermKind::Var: return name() == from ? to : *this;
            case TermKind::Cons: {
                Term h = head().substitute(from, to), t = tail().substitute(from, to);
                if (h.node_ == node_->head && t.node_ == node_->tail) return *this;
                return cons(h, t);
            }
            default: return *this;
        }
    }

    std::string str() const {
        switch (kind()) {
            case TermKind::Var:
            case TermKind::Atom: return name();
            case TermKind::Num: return to_string(value());
            case TermKind::Wildcard: return "_";
            case TermKind::Random: return "random(" + to_string(random_lo()) + ", " + to_string(random_hi()) + ")";
            case TermKind::Cons: {
                std::string out = "[" + head().str();
                Term rest = tail();
                while (rest.kind() == TermKind::Cons) {
                    out += ", " + rest.head().str();
                    rest = rest.tail();
                }
                if (!(rest.kind() == TermKind::Atom && rest.name() == "[]")) out += "|" + rest.str();
                return out + "]";
            }
        }
        return "?";
    }

private:
    struct Node {
        TermKind kind;
        std::string name;
        Rational value;
        Rational hi;
        std::shared_ptr<const Node> head, tail;
    };
    explicit Term(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    static std::shared_ptr<Node> make(TermKind k, std::string name) {
        auto n = std::make_shared<Node>();
        n->kind = k;
        n->name = std::move(name);
        return n;
    }
    std::shared_ptr<const Node> node_;
};

}  // namespace hytccp
