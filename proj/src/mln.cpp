#include "chordgm/mln.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <set>

#include "chordgm/errors.hpp"

namespace chordgm {
namespace {

enum class Tok { Word, LParen, RParen, Comma, Bang, Caret, LBrace, RBrace, Equals, Newline, End };

struct Token {
    Tok kind;
    std::string text;
    std::size_t line;
    std::size_t column;
};

bool word_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '#' ||
           c == '.' || c == '+' || c == '-';
}

std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> out;
    std::size_t line = 1, col = 1;
    std::size_t i = 0;
    auto advance = [&](std::size_t n) {
        i += n;
        col += n;
    };
    while (i < text.size()) {
        const char c = text[i];
        if (c == '\n') {
            out.push_back({Tok::Newline, "\n", line, col});
            ++i;
            ++line;
            col = 1;
        } else if (c == ' ' || c == '\t' || c == '\r') {
            advance(1);
        } else if (c == '/' && i + 1 < text.size() && text[i + 1] == '/') {
            while (i < text.size() && text[i] != '\n') advance(1);
        } else if (word_char(c)) {
            const std::size_t start = i, start_col = col;
            while (i < text.size() && word_char(text[i])) advance(1);
            out.push_back({Tok::Word, std::string(text.substr(start, i - start)), line, start_col});
        } else {
            Tok kind;
            switch (c) {
            case '(': kind = Tok::LParen; break;
            case ')': kind = Tok::RParen; break;
            case ',': kind = Tok::Comma; break;
            case '!': kind = Tok::Bang; break;
            case '^': kind = Tok::Caret; break;
            case '{': kind = Tok::LBrace; break;
            case '}': kind = Tok::RBrace; break;
            case '=': kind = Tok::Equals; break;
            default: throw ParseError(std::string("unexpected character '") + c + "'", line, col);
            }
            out.push_back({kind, std::string(1, c), line, col});
            advance(1);
        }
    }
    out.push_back({Tok::End, "", line, col});
    return out;
}

const char* describe(Tok kind) {
    switch (kind) {
    case Tok::Word: return "a name";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::Comma: return "','";
    case Tok::Bang: return "'!'";
    case Tok::Caret: return "'^'";
    case Tok::LBrace: return "'{'";
    case Tok::RBrace: return "'}'";
    case Tok::Equals: return "'='";
    case Tok::Newline: return "end of line";
    case Tok::End: return "end of input";
    }
    return "?";
}

std::optional<double> parse_weight(const std::string& text) {
    double value = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    return value;
}

std::string format_weight(double w) {
    if (w == -INFINITY) return "-inf";
    std::array<char, 64> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), w);
    return std::string(buf.data(), ptr);
}

class Parser {
public:
    explicit Parser(std::string_view text) : tokens_(tokenize(text)) {}

    MlnProgram parse_program() {
        while (true) {
            skip_newlines();
            const Token& t = peek();
            if (t.kind == Tok::End) break;
            if (t.kind == Tok::Word && t.text == "domain") {
                parse_domain();
            } else if (t.kind == Tok::Word && t.text == "predicate") {
                parse_predicate();
            } else if (t.kind == Tok::Word && t.text == "evidence") {
                parse_evidence_block();
            } else {
                parse_formula();
            }
        }
        return std::move(program_);
    }

    std::vector<Atom> parse_atom_list() {
        std::vector<Atom> atoms;
        while (true) {
            skip_separators();
            if (peek().kind == Tok::End) break;
            atoms.push_back(parse_atom(false).first);
            end_statement();
        }
        return atoms;
    }

private:
    const Token& peek() const { return tokens_[pos_]; }
    const Token& next() { return tokens_[pos_++]; }

    [[noreturn]] void fail(const Token& at, const std::string& what) const {
        throw ParseError(what, at.line, at.column);
    }

    const Token& expect(Tok kind, const char* context) {
        const Token& t = next();
        if (t.kind != kind)
            fail(t, std::string("expected ") + describe(kind) + " " + context + ", found " +
                        (t.kind == Tok::Word ? "'" + t.text + "'" : describe(t.kind)));
        return t;
    }

    void skip_newlines() {
        while (peek().kind == Tok::Newline) ++pos_;
    }

    void skip_separators() {
        while (peek().kind == Tok::Newline || peek().kind == Tok::Comma) ++pos_;
    }

    void end_statement() {
        const Token& t = peek();
        if (t.kind == Tok::Newline || t.kind == Tok::End) return;
        fail(t, "expected end of line, found " + (t.kind == Tok::Word ? "'" + t.text + "'" : std::string(describe(t.kind))));
    }

    void parse_domain() {
        next();
        const Token& name = expect(Tok::Word, "after 'domain'");
        if (program_.find_domain(name.text)) fail(name, "domain '" + name.text + "' declared twice");
        expect(Tok::Equals, "after domain name");
        skip_newlines();
        expect(Tok::LBrace, "to open the domain");
        Domain domain{name.text, {}};
        std::set<std::string> seen;
        skip_separators();
        while (peek().kind != Tok::RBrace) {
            const Token& c = expect(Tok::Word, "in domain");
            if (is_logical_variable(c.text)) fail(c, "domain constant '" + c.text + "' starts with a lowercase letter");
            if (!seen.insert(c.text).second) fail(c, "constant '" + c.text + "' repeated in domain");
            domain.constants.push_back(c.text);
            skip_newlines();
            if (peek().kind == Tok::Comma) {
                next();
                skip_newlines();
            } else if (peek().kind != Tok::RBrace) {
                fail(peek(), "expected ',' or '}' in domain");
            }
        }
        next();
        end_statement();
        program_.domains.push_back(std::move(domain));
    }

    void parse_predicate() {
        next();
        const Token& name = expect(Tok::Word, "after 'predicate'");
        if (program_.find_predicate(name.text)) fail(name, "predicate '" + name.text + "' declared twice");
        PredicateDecl decl{name.text, {}, std::nullopt, false};
        expect(Tok::LParen, "after predicate name");
        if (peek().kind != Tok::RParen) {
            while (true) {
                const Token& d = expect(Tok::Word, "as argument domain");
                if (!program_.find_domain(d.text)) fail(d, "unknown domain '" + d.text + "'");
                decl.arg_domains.push_back(d.text);
                if (peek().kind == Tok::Bang) {
                    const Token& bang = next();
                    if (decl.exclusive_arg) fail(bang, "predicate has more than one exclusive argument");
                    decl.exclusive_arg = decl.arg_domains.size() - 1;
                }
                if (peek().kind == Tok::Comma) {
                    next();
                    continue;
                }
                break;
            }
        }
        expect(Tok::RParen, "to close the argument list");
        if (peek().kind == Tok::Word) {
            const Token& kw = next();
            if (kw.text != "closed") fail(kw, "expected 'closed' or end of line, found '" + kw.text + "'");
            decl.closed = true;
        }
        end_statement();
        program_.predicates.push_back(std::move(decl));
    }

    void parse_evidence_block() {
        next();
        skip_newlines();
        expect(Tok::LBrace, "to open the evidence block");
        while (true) {
            skip_separators();
            if (peek().kind == Tok::RBrace) break;
            if (peek().kind == Tok::End) fail(peek(), "unterminated evidence block");
            program_.evidence.push_back(parse_atom(false).first);
            const Tok k = peek().kind;
            if (k != Tok::Newline && k != Tok::Comma && k != Tok::RBrace) fail(peek(), "expected ',' or end of line in evidence");
        }
        next();
        end_statement();
    }

    void parse_formula() {
        const Token& w = expect(Tok::Word, "at start of statement");
        const auto weight = parse_weight(w.text);
        if (!weight) fail(w, "expected a weight or a declaration, found '" + w.text + "'");
        if (std::isnan(*weight) || *weight == INFINITY) fail(w, "weight must be finite or -inf");
        WeightedFormula f{*weight, {}};
        std::map<std::string, std::string> var_domains;
        while (true) {
            bool positive = true;
            if (peek().kind == Tok::Bang) {
                next();
                positive = false;
            }
            auto [atom, arg_tokens] = parse_atom(true);
            const PredicateDecl& decl = *program_.find_predicate(atom.predicate);
            for (std::size_t i = 0; i < atom.args.size(); ++i) {
                if (!is_logical_variable(atom.args[i])) continue;
                const auto [it, inserted] = var_domains.emplace(atom.args[i], decl.arg_domains[i]);
                if (!inserted && it->second != decl.arg_domains[i])
                    fail(tokens_[arg_tokens[i]], "variable '" + atom.args[i] + "' used with domains '" + it->second +
                                                     "' and '" + decl.arg_domains[i] + "'");
            }
            f.literals.push_back({std::move(atom), positive});
            if (peek().kind != Tok::Caret) break;
            next();
            skip_newlines();
        }
        end_statement();
        program_.formulas.push_back(std::move(f));
    }

    // Returns the atom and the token positions of its arguments.
    std::pair<Atom, std::vector<std::size_t>> parse_atom(bool allow_variables) {
        const Token& name = expect(Tok::Word, "as predicate name");
        const PredicateDecl* decl = program_.find_predicate(name.text);
        if (!decl) fail(name, "unknown predicate '" + name.text + "'");
        Atom atom{name.text, {}};
        std::vector<std::size_t> positions;
        expect(Tok::LParen, "after predicate name");
        if (peek().kind != Tok::RParen) {
            while (true) {
                positions.push_back(pos_);
                atom.args.push_back(expect(Tok::Word, "as argument").text);
                if (peek().kind == Tok::Comma) {
                    next();
                    continue;
                }
                break;
            }
        }
        const Token& close = expect(Tok::RParen, "to close the atom");
        if (atom.args.size() != decl->arg_domains.size())
            fail(close, "predicate '" + name.text + "' takes " + std::to_string(decl->arg_domains.size()) +
                            " arguments, got " + std::to_string(atom.args.size()));
        for (std::size_t i = 0; i < atom.args.size(); ++i) {
            const Token& at = tokens_[positions[i]];
            if (is_logical_variable(atom.args[i])) {
                if (!allow_variables) fail(at, "evidence atoms must be ground, found variable '" + atom.args[i] + "'");
                continue;
            }
            const Domain* d = program_.find_domain(decl->arg_domains[i]);
            if (d && std::find(d->constants.begin(), d->constants.end(), atom.args[i]) == d->constants.end())
                fail(at, "undeclared constant '" + atom.args[i] + "' in domain '" + d->name + "'");
        }
        return {std::move(atom), std::move(positions)};
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
    MlnProgram program_;
};

} // namespace

bool is_logical_variable(std::string_view arg) noexcept { return !arg.empty() && arg.front() >= 'a' && arg.front() <= 'z'; }

const Domain* MlnProgram::find_domain(std::string_view name) const {
    for (const Domain& d : domains)
        if (d.name == name) return &d;
    return nullptr;
}

const PredicateDecl* MlnProgram::find_predicate(std::string_view name) const {
    for (const PredicateDecl& p : predicates)
        if (p.name == name) return &p;
    return nullptr;
}

void MlnProgram::validate() const {
    std::set<std::string> names;
    for (const Domain& d : domains) {
        if (!names.insert(d.name).second) throw ModelError("domain '" + d.name + "' declared twice");
        std::set<std::string> seen;
        for (const auto& c : d.constants) {
            if (c.empty() || is_logical_variable(c)) throw ModelError("invalid constant '" + c + "' in domain '" + d.name + "'");
            if (!seen.insert(c).second) throw ModelError("constant '" + c + "' repeated in domain '" + d.name + "'");
        }
    }
    names.clear();
    for (const PredicateDecl& p : predicates) {
        if (!names.insert(p.name).second) throw ModelError("predicate '" + p.name + "' declared twice");
        for (const auto& d : p.arg_domains)
            if (!find_domain(d)) throw ModelError("predicate '" + p.name + "' uses unknown domain '" + d + "'");
        if (p.exclusive_arg && *p.exclusive_arg >= p.arg_domains.size())
            throw ModelError("predicate '" + p.name + "' has an out-of-range exclusive argument");
    }

    auto check_atom = [&](const Atom& atom, bool ground) -> const PredicateDecl& {
        const PredicateDecl* decl = find_predicate(atom.predicate);
        if (!decl) throw ModelError("unknown predicate '" + atom.predicate + "'");
        if (atom.args.size() != decl->arg_domains.size())
            throw ModelError("predicate '" + atom.predicate + "' takes " + std::to_string(decl->arg_domains.size()) +
                             " arguments, got " + std::to_string(atom.args.size()));
        for (std::size_t i = 0; i < atom.args.size(); ++i) {
            if (is_logical_variable(atom.args[i])) {
                if (ground) throw ModelError("evidence atom " + format_atom(atom) + " is not ground");
                continue;
            }
            const Domain& d = *find_domain(decl->arg_domains[i]);
            if (std::find(d.constants.begin(), d.constants.end(), atom.args[i]) == d.constants.end())
                throw ModelError("undeclared constant '" + atom.args[i] + "' in domain '" + d.name + "'");
        }
        return *decl;
    };

    for (const WeightedFormula& f : formulas) {
        if (f.literals.empty()) throw ModelError("formula has no literals");
        if (std::isnan(f.weight) || f.weight == INFINITY) throw ModelError("formula weight must be finite or -inf");
        std::map<std::string, std::string> var_domains;
        for (const Literal& lit : f.literals) {
            const PredicateDecl& decl = check_atom(lit.atom, false);
            for (std::size_t i = 0; i < lit.atom.args.size(); ++i) {
                if (!is_logical_variable(lit.atom.args[i])) continue;
                const auto [it, inserted] = var_domains.emplace(lit.atom.args[i], decl.arg_domains[i]);
                if (!inserted && it->second != decl.arg_domains[i])
                    throw ModelError("variable '" + lit.atom.args[i] + "' used with domains '" + it->second + "' and '" +
                                     decl.arg_domains[i] + "'");
            }
        }
    }
    for (const Atom& a : evidence) check_atom(a, true);
}

MlnProgram parse_mln(std::string_view text) { return Parser(text).parse_program(); }

std::string format_atom(const Atom& atom) {
    std::string out = atom.predicate + "(";
    for (std::size_t i = 0; i < atom.args.size(); ++i) {
        if (i) out += ", ";
        out += atom.args[i];
    }
    return out + ")";
}

std::string write_mln(const MlnProgram& program) {
    std::string out;
    for (const Domain& d : program.domains) {
        out += "domain " + d.name + " = { ";
        for (std::size_t i = 0; i < d.constants.size(); ++i) {
            if (i) out += ", ";
            out += d.constants[i];
        }
        out += d.constants.empty() ? "}\n" : " }\n";
    }
    for (const PredicateDecl& p : program.predicates) {
        out += "predicate " + p.name + "(";
        for (std::size_t i = 0; i < p.arg_domains.size(); ++i) {
            if (i) out += ", ";
            out += p.arg_domains[i];
            if (p.exclusive_arg == i) out += '!';
        }
        out += p.closed ? ") closed\n" : ")\n";
    }
    if (!program.formulas.empty()) out += '\n';
    for (const WeightedFormula& f : program.formulas) {
        out += format_weight(f.weight) + ' ';
        for (std::size_t i = 0; i < f.literals.size(); ++i) {
            if (i) out += " ^ ";
            if (!f.literals[i].positive) out += '!';
            out += format_atom(f.literals[i].atom);
        }
        out += '\n';
    }
    if (!program.evidence.empty()) {
        out += "\nevidence {\n";
        for (const Atom& a : program.evidence) out += "  " + format_atom(a) + "\n";
        out += "}\n";
    }
    return out;
}

std::vector<Atom> parse_db(std::string_view text) {
    // Predicates are not declared in a .db file; accept any name and arity.
    std::vector<Atom> atoms;
    const auto tokens = tokenize(text);
    std::size_t i = 0;
    auto fail = [&](const Token& t, const std::string& what) { throw ParseError(what, t.line, t.column); };
    while (tokens[i].kind != Tok::End) {
        if (tokens[i].kind == Tok::Newline) {
            ++i;
            continue;
        }
        if (tokens[i].kind != Tok::Word) fail(tokens[i], "expected a predicate name");
        Atom atom{tokens[i++].text, {}};
        if (tokens[i].kind != Tok::LParen) fail(tokens[i], "expected '(' after predicate name");
        ++i;
        if (tokens[i].kind != Tok::RParen) {
            while (true) {
                if (tokens[i].kind != Tok::Word) fail(tokens[i], "expected an argument");
                if (is_logical_variable(tokens[i].text))
                    fail(tokens[i], "evidence atoms must be ground, found variable '" + tokens[i].text + "'");
                atom.args.push_back(tokens[i++].text);
                if (tokens[i].kind == Tok::Comma) {
                    ++i;
                    continue;
                }
                break;
            }
        }
        if (tokens[i].kind != Tok::RParen) fail(tokens[i], "expected ')' to close the atom");
        ++i;
        if (tokens[i].kind != Tok::Newline && tokens[i].kind != Tok::End) fail(tokens[i], "expected one atom per line");
        atoms.push_back(std::move(atom));
    }
    return atoms;
}

std::string write_db(const std::vector<Atom>& atoms) {
    std::string out;
    for (const Atom& a : atoms) out += format_atom(a) + '\n';
    return out;
}

} // namespace chordgm
