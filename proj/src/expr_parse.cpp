#include "symrl/expr.hpp"

#include <cctype>
#include <charconv>

namespace symrl {

namespace {

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    Expression parse() {
        std::vector<Node> nodes;
        parse_into(nodes);
        skip_space();
        if (pos_ != text_.size())
            fail("unexpected trailing input");
        return Expression(std::move(nodes));
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw StructuralError("cannot parse expression at offset " + std::to_string(pos_) + ": " + what);
    }

    void skip_space() {
        while (pos_ < text_.size() && text_[pos_] == ' ')
            ++pos_;
    }

    void expect(char c) {
        skip_space();
        if (pos_ >= text_.size() || text_[pos_] != c)
            fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    void parse_into(std::vector<Node>& out) {
        skip_space();
        if (pos_ >= text_.size())
            fail("unexpected end of input");
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            const std::size_t op_at = out.size();
            out.push_back(Node::op_node(Op::Add));
            parse_into(out);
            skip_space();
            if (pos_ >= text_.size())
                fail("expected binary operator");
            switch (text_[pos_]) {
            case '+': out[op_at].op = Op::Add; break;
            case '-': out[op_at].op = Op::Sub; break;
            case '*': out[op_at].op = Op::Mul; break;
            default: fail("expected binary operator");
            }
            ++pos_;
            parse_into(out);
            expect(')');
            return;
        }
        if (c == '-' || c == '.' || std::isdigit(static_cast<unsigned char>(c)) || c == 'n' || c == 'i') {
            // Numbers; "nan" and "inf" appear only for non-finite constants.
            double v = 0.0;
            auto res = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), v);
            if (res.ec != std::errc())
                fail("malformed number");
            pos_ = static_cast<std::size_t>(res.ptr - text_.data());
            out.push_back(Node::constant(v));
            return;
        }
        if (c == 'v' && pos_ + 1 < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_ + 1]))) {
            ++pos_;
            std::uint32_t idx = 0;
            auto res = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), idx);
            if (res.ec != std::errc())
                fail("malformed variable index");
            pos_ = static_cast<std::size_t>(res.ptr - text_.data());
            out.push_back(Node::variable(idx));
            return;
        }
        std::size_t end = pos_;
        while (end < text_.size() && std::isalpha(static_cast<unsigned char>(text_[end])))
            ++end;
        if (end == pos_)
            fail("unexpected character");
        Op op{};
        try {
            op = op_from_name(text_.substr(pos_, end - pos_));
        } catch (const std::invalid_argument& e) {
            fail(e.what());
        }
        if (arity(op) != 1)
            fail("binary operators use infix form");
        pos_ = end;
        out.push_back(Node::op_node(op));
        expect('(');
        parse_into(out);
        expect(')');
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

} // namespace

Expression parse_expression(std::string_view text) { return Parser(text).parse(); }

} // namespace symrl
