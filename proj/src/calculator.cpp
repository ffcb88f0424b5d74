// SPDX-License-Identifier: Apache-2.0
#include <pathfinder/tools.hpp>

#include <boost/multiprecision/cpp_int.hpp>

#include <fmt/format.h>

#include <cctype>
#include <memory>
#include <variant>

namespace pathfinder
{

namespace
{
    using Integer = boost::multiprecision::cpp_int;
    using Rational = boost::multiprecision::cpp_rational;

    struct SyntaxError
    {
        std::size_t position;
        std::string message;
    };

    struct DivisionByZero
    {
    };

    struct Node;
    using NodePtr = std::unique_ptr<Node>;

    struct Node
    {
        enum class Op
        {
            Literal,
            Negate,
            Percent,
            Add,
            Subtract,
            Multiply,
            Divide,
        };

        Op op = Op::Literal;
        Rational value;
        NodePtr lhs;
        NodePtr rhs;
    };

    NodePtr makeNode(Node::Op op, NodePtr lhs, NodePtr rhs = {})
    {
        auto node = std::make_unique<Node>();
        node->op = op;
        node->lhs = std::move(lhs);
        node->rhs = std::move(rhs);
        return node;
    }

    // Recursive-descent parser. Accepts the ASCII operators plus the Unicode
    // minus sign, multiplication sign and division sign.
    class Parser
    {
      public:
        explicit Parser(std::string_view text): _text(text) {}

        NodePtr parse()
        {
            auto node = expression();
            skipSpace();
            if (_pos < _text.size())
                fail(fmt::format("unexpected '{}'", currentGlyph()));
            return node;
        }

      private:
        enum class Tok
        {
            Plus,
            Minus,
            Times,
            Divide,
            Percent,
            Open,
            Close,
            Other,
            End,
        };

        std::string_view _text;
        std::size_t _pos = 0;

        [[noreturn]] void fail(std::string message) const { throw SyntaxError { _pos + 1, std::move(message) }; }

        void skipSpace()
        {
            while (_pos < _text.size() && std::isspace(static_cast<unsigned char>(_text[_pos])))
                ++_pos;
        }

        std::string currentGlyph() const
        {
            auto len = std::size_t { 1 };
            auto const lead = static_cast<unsigned char>(_text[_pos]);
            if (lead >= 0xF0)
                len = 4;
            else if (lead >= 0xE0)
                len = 3;
            else if (lead >= 0xC0)
                len = 2;
            return std::string(_text.substr(_pos, len));
        }

        // Returns the token at the cursor and its byte length without consuming.
        std::pair<Tok, std::size_t> peek()
        {
            skipSpace();
            if (_pos >= _text.size())
                return { Tok::End, 0 };
            auto const rest = _text.substr(_pos);
            switch (rest.front())
            {
                case '+': return { Tok::Plus, 1 };
                case '-': return { Tok::Minus, 1 };
                case '*': return { Tok::Times, 1 };
                case '/': return { Tok::Divide, 1 };
                case '%': return { Tok::Percent, 1 };
                case '(': return { Tok::Open, 1 };
                case ')': return { Tok::Close, 1 };
                default: break;
            }
            if (rest.starts_with("−"))
                return { Tok::Minus, 3 };
            if (rest.starts_with("×"))
                return { Tok::Times, 2 };
            if (rest.starts_with("÷"))
                return { Tok::Divide, 2 };
            return { Tok::Other, 0 };
        }

        NodePtr expression()
        {
            auto node = term();
            for (;;)
            {
                auto const [tok, len] = peek();
                if (tok != Tok::Plus && tok != Tok::Minus)
                    return node;
                _pos += len;
                node = makeNode(tok == Tok::Plus ? Node::Op::Add : Node::Op::Subtract, std::move(node), term());
            }
        }

        NodePtr term()
        {
            auto node = unary();
            for (;;)
            {
                auto const [tok, len] = peek();
                if (tok != Tok::Times && tok != Tok::Divide)
                    return node;
                _pos += len;
                node = makeNode(tok == Tok::Times ? Node::Op::Multiply : Node::Op::Divide, std::move(node), unary());
            }
        }

        NodePtr unary()
        {
            auto const [tok, len] = peek();
            if (tok == Tok::Minus)
            {
                _pos += len;
                return makeNode(Node::Op::Negate, unary());
            }
            if (tok == Tok::Plus)
            {
                _pos += len;
                return unary();
            }
            return postfix();
        }

        NodePtr postfix()
        {
            auto node = primary();
            for (;;)
            {
                auto const [tok, len] = peek();
                if (tok != Tok::Percent)
                    return node;
                _pos += len;
                node = makeNode(Node::Op::Percent, std::move(node));
            }
        }

        NodePtr primary()
        {
            auto const [tok, len] = peek();
            if (tok == Tok::End)
                fail("unexpected end of expression");
            if (tok == Tok::Open)
            {
                _pos += len;
                auto node = expression();
                if (peek().first != Tok::Close)
                {
                    if (_pos >= _text.size())
                        fail("missing ')'");
                    fail(fmt::format("expected ')' but found '{}'", currentGlyph()));
                }
                ++_pos;
                return node;
            }
            return number();
        }

        NodePtr number()
        {
            auto const start = _pos;
            auto digits = std::string {};
            auto fractionDigits = std::size_t { 0 };
            auto seenPoint = false;
            while (_pos < _text.size())
            {
                auto const c = _text[_pos];
                if (std::isdigit(static_cast<unsigned char>(c)))
                {
                    digits.push_back(c);
                    if (seenPoint)
                        ++fractionDigits;
                }
                else if (c == '.' && !seenPoint)
                {
                    seenPoint = true;
                }
                else
                {
                    break;
                }
                ++_pos;
            }
            if (digits.empty())
            {
                _pos = start;
                fail(fmt::format("unexpected '{}'", currentGlyph()));
            }
            auto node = std::make_unique<Node>();
            auto const scale = Integer(boost::multiprecision::pow(Integer(10), static_cast<unsigned>(fractionDigits)));
            node->value = Rational(Integer(digits), scale);
            return node;
        }
    };

    Rational evaluate(const Node& node)
    {
        switch (node.op)
        {
            case Node::Op::Literal: return node.value;
            case Node::Op::Negate: return -evaluate(*node.lhs);
            case Node::Op::Percent: return evaluate(*node.lhs) / 100;
            case Node::Op::Add: return evaluate(*node.lhs) + evaluate(*node.rhs);
            case Node::Op::Subtract: return evaluate(*node.lhs) - evaluate(*node.rhs);
            case Node::Op::Multiply: return evaluate(*node.lhs) * evaluate(*node.rhs);
            case Node::Op::Divide: {
                auto const lhs = evaluate(*node.lhs);
                auto const rhs = evaluate(*node.rhs);
                if (rhs == 0)
                    throw DivisionByZero {};
                return lhs / rhs;
            }
        }
        return 0;
    }

    std::size_t decimalDigits(const Integer& value)
    {
        return value.str().size();
    }

    // Rounds to 10 significant digits (half away from zero) and renders in
    // fixed notation, switching to scientific outside 1e-7 .. 1e16.
    std::string render(const Rational& value)
    {
        constexpr auto Significant = 10;
        if (value == 0)
            return "0";

        auto const negative = value < 0;
        Rational const magnitude = negative ? Rational(-value) : value;
        Integer const num = boost::multiprecision::numerator(magnitude);
        Integer const den = boost::multiprecision::denominator(magnitude);

        // exponent = floor(log10(magnitude))
        auto exponent = static_cast<long>(decimalDigits(num)) - static_cast<long>(decimalDigits(den));
        auto const pow10 = [](long e) -> Integer { return boost::multiprecision::pow(Integer(10), static_cast<unsigned>(e)); };
        auto const tenTo = [&](long e) -> Rational { return e >= 0 ? Rational(pow10(e)) : Rational(Integer(1), pow10(-e)); };
        while (magnitude < tenTo(exponent))
            --exponent;
        while (magnitude >= tenTo(exponent + 1))
            ++exponent;

        Rational const scaled = magnitude * tenTo(Significant - 1 - exponent);
        Integer const scaledNum = boost::multiprecision::numerator(scaled);
        Integer const scaledDen = boost::multiprecision::denominator(scaled);
        auto rounded = Integer((2 * scaledNum + scaledDen) / (2 * scaledDen));
        if (rounded == pow10(Significant))
        {
            rounded /= 10;
            ++exponent;
        }

        auto digits = rounded.str();
        auto out = std::string(negative ? "-" : "");

        auto const stripZeros = [](std::string text) {
            while (!text.empty() && text.back() == '0')
                text.pop_back();
            return text;
        };

        if (exponent < -7 || exponent > 15)
        {
            auto const fraction = stripZeros(digits.substr(1));
            out += digits.substr(0, 1);
            if (!fraction.empty())
                out += "." + fraction;
            out += fmt::format("e{}{:02}", exponent < 0 ? '-' : '+', std::labs(exponent));
            return out;
        }

        if (exponent >= Significant - 1)
            return out + digits + std::string(static_cast<std::size_t>(exponent - (Significant - 1)), '0');

        if (exponent >= 0)
        {
            auto const split = static_cast<std::size_t>(exponent + 1);
            auto const fraction = stripZeros(digits.substr(split));
            out += digits.substr(0, split);
            if (!fraction.empty())
                out += "." + fraction;
            return out;
        }

        return out + "0." + std::string(static_cast<std::size_t>(-exponent - 1), '0') + stripZeros(digits);
    }
} // namespace

ToolResult calculate(std::string_view expression)
{
    try
    {
        auto const tree = Parser(expression).parse();
        return ToolResult::success(render(evaluate(*tree)));
    }
    catch (const SyntaxError& e)
    {
        return ToolResult::failure(fmt::format("syntax error at position {}: {}", e.position, e.message));
    }
    catch (const DivisionByZero&)
    {
        return ToolResult::failure("division by zero");
    }
}

} // namespace pathfinder
