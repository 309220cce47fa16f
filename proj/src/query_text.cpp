#include "vchain/query_text.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "vchain/errors.hpp"

namespace vchain {

namespace {

struct Cursor {
    const std::string& s;
    size_t pos = 0;

    void skip_ws() {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool eof() {
        skip_ws();
        return pos >= s.size();
    }
    char peek() {
        skip_ws();
        return pos < s.size() ? s[pos] : '\0';
    }
    bool try_consume(char c) {
        skip_ws();
        if (pos < s.size() && s[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }
    void expect(char c) {
        if (!try_consume(c))
            throw ParseError("query: expected '" + std::string(1, c) + "' at offset " +
                             std::to_string(pos));
    }
    bool try_keyword(const std::string& word) {
        skip_ws();
        if (s.compare(pos, word.size(), word) == 0) {
            pos += word.size();
            return true;
        }
        return false;
    }
    double number() {
        skip_ws();
        size_t start = pos;
        if (try_keyword("+inf") || try_keyword("inf"))
            return std::numeric_limits<double>::infinity();
        pos = start;
        if (try_keyword("-inf")) return -std::numeric_limits<double>::infinity();
        pos = start;
        char* end = nullptr;
        double v = std::strtod(s.c_str() + pos, &end);
        if (end == s.c_str() + pos) throw ParseError("query: expected number at offset " +
                                                     std::to_string(pos));
        pos = end - s.c_str();
        return v;
    }
    uint64_t integer() {
        double v = number();
        if (!std::isfinite(v) || v < 0 || std::floor(v) != v)
            throw ParseError("query: expected non-negative integer");
        return static_cast<uint64_t>(v);
    }
    std::string quoted() {
        skip_ws();
        if (pos >= s.size() || s[pos] != '"') throw ParseError("query: expected quoted keyword");
        size_t end = s.find('"', pos + 1);
        if (end == std::string::npos) throw ParseError("query: unterminated keyword");
        std::string out = s.substr(pos + 1, end - pos - 1);
        if (out.empty()) throw ParseError("query: empty keyword");
        pos = end + 1;
        return out;
    }
};

std::vector<double> tuple_or_scalar(Cursor& c) {
    std::vector<double> vals;
    if (c.try_consume('(')) {
        vals.push_back(c.number());
        while (c.try_consume(',')) vals.push_back(c.number());
        c.expect(')');
    } else {
        vals.push_back(c.number());
    }
    return vals;
}

// CNF only: conj := term (AND term)*; term := quoted | '(' quoted (OR quoted)* ')'
CnfCondition parse_bool(Cursor& c) {
    CnfCondition cond;
    for (;;) {
        Clause clause;
        if (c.try_consume('(')) {
            clause.elems.push_back(AttrElement::make_keyword(c.quoted()));
            while (c.try_keyword("OR")) {
                clause.elems.push_back(AttrElement::make_keyword(c.quoted()));
            }
            c.expect(')');
        } else {
            clause.elems.push_back(AttrElement::make_keyword(c.quoted()));
        }
        clause.normalize();
        cond.clauses.push_back(std::move(clause));
        if (!c.try_keyword("AND")) break;
    }
    return cond;
}

} // namespace

QuerySpec parse_query_text(const std::string& text) {
    QuerySpec q;
    Cursor c{text};
    bool saw_any = false;
    while (!c.eof()) {
        if (c.try_keyword("window=")) {
            c.expect('[');
            uint64_t ts = c.integer();
            c.expect(',');
            uint64_t te = c.integer();
            c.expect(']');
            if (ts > te) throw DomainError("query: inverted window");
            q.window = {ts, te};
            saw_any = true;
        } else if (c.try_keyword("range=")) {
            c.expect('[');
            std::vector<double> alpha = tuple_or_scalar(c);
            c.expect(',');
            std::vector<double> beta = tuple_or_scalar(c);
            c.expect(']');
            if (alpha.size() != beta.size())
                throw ParseError("query: range corners have different dimensionality");
            for (size_t i = 0; i < alpha.size(); ++i) q.range.emplace_back(alpha[i], beta[i]);
            saw_any = true;
        } else if (c.try_keyword("bool=")) {
            q.bool_cond = parse_bool(c);
            saw_any = true;
        } else {
            throw ParseError("query: unexpected token at offset " + std::to_string(c.pos));
        }
    }
    if (!saw_any) throw ParseError("query: empty query text");
    return q;
}

std::string QuerySpec::canonical_text() const {
    std::ostringstream out;
    bool first = true;
    auto sep = [&] {
        if (!first) out << " ";
        first = false;
    };
    if (window) {
        sep();
        out << "window=[" << window->first << "," << window->second << "]";
    }
    if (!range.empty()) {
        sep();
        auto num = [&](double x) {
            if (std::isinf(x))
                out << (x > 0 ? "inf" : "-inf");
            else if (std::floor(x) == x && std::abs(x) < 1e15)
                out << static_cast<long long>(x);
            else
                out << x;
        };
        out << "range=[(";
        for (size_t i = 0; i < range.size(); ++i) {
            if (i) out << ",";
            num(range[i].first);
        }
        out << "),(";
        for (size_t i = 0; i < range.size(); ++i) {
            if (i) out << ",";
            num(range[i].second);
        }
        out << ")]";
    }
    if (!bool_cond.clauses.empty()) {
        sep();
        out << "bool=";
        for (size_t i = 0; i < bool_cond.clauses.size(); ++i) {
            if (i) out << " AND ";
            const auto& cl = bool_cond.clauses[i];
            if (cl.elems.size() == 1) {
                out << "\"" << cl.elems[0].kw << "\"";
            } else {
                out << "(";
                for (size_t j = 0; j < cl.elems.size(); ++j) {
                    if (j) out << " OR ";
                    out << "\"" << cl.elems[j].kw << "\"";
                }
                out << ")";
            }
        }
    }
    return out.str();
}

} // namespace vchain
