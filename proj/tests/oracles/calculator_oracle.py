#!/usr/bin/env python3
"""Independent reference for the calculator tool.

Builds random expression trees over small integers, renders them as text and
evaluates the tree itself with exact fractions (the rendered text is never
parsed here). The frozen corpus in tests/data/calculator_oracle.json is what
the C++ suite compares against.

    calculator_oracle.py --write   regenerate the frozen file
    calculator_oracle.py --check   fail unless the frozen file matches
"""

import argparse
import json
import random
import sys
from fractions import Fraction
from pathlib import Path

SEED = 20240611
COUNT = 1000
FROZEN = Path(__file__).resolve().parent.parent / "data" / "calculator_oracle.json"

PREC = {"+": 1, "-": 1, "*": 2, "/": 2}
GLYPHS = {"-": ["-", "−"], "*": ["*", "×"], "/": ["/", "÷"], "+": ["+"]}


class DivZero(Exception):
    pass


def gen(rng, depth):
    if depth == 0 or rng.random() < 0.25:
        node = ("num", rng.randint(0, 99))
        if rng.random() < 0.08:
            node = ("pct", node)
        return node
    r = rng.random()
    if r < 0.1:
        return ("neg", gen(rng, depth - 1))
    op = rng.choice("+-*/")
    return (op, gen(rng, depth - 1), gen(rng, depth - 1))


def value(node):
    kind = node[0]
    if kind == "num":
        return Fraction(node[1])
    if kind == "pct":
        return value(node[1]) / 100
    if kind == "neg":
        return -value(node[1])
    a, b = value(node[1]), value(node[2])
    if kind == "+":
        return a + b
    if kind == "-":
        return a - b
    if kind == "*":
        return a * b
    if b == 0:
        raise DivZero()
    return a / b


def render(node, rng):
    kind = node[0]
    if kind == "num":
        return str(node[1])
    if kind == "pct":
        return atom(node[1], rng) + "%"
    if kind == "neg":
        return "-" + atom(node[1], rng)
    op = kind
    left = render(node[1], rng)
    right = render(node[2], rng)
    if node[1][0] in PREC and PREC[node[1][0]] < PREC[op]:
        left = "(" + left + ")"
    if node[2][0] in PREC and (PREC[node[2][0]] < PREC[op] or (PREC[node[2][0]] == PREC[op] and op in "-/")):
        right = "(" + right + ")"
    glyph = rng.choice(GLYPHS[op])
    space = " " if rng.random() < 0.5 else ""
    return left + space + glyph + space + right


def atom(node, rng):
    text = render(node, rng)
    return text if node[0] == "num" else "(" + text + ")"


def corpus():
    rng = random.Random(SEED)
    cases = []
    while len(cases) < COUNT:
        tree = gen(rng, rng.randint(1, 4))
        text = render(tree, rng)
        try:
            v = value(tree)
            cases.append({"expr": text, "numerator": str(v.numerator), "denominator": str(v.denominator)})
        except DivZero:
            cases.append({"expr": text, "error": "division by zero"})
    return cases


def ten_significant(v):
    # Half away from zero at 10 significant digits, as the tool renders.
    if v == 0:
        return "0"
    from decimal import Decimal, ROUND_HALF_UP, getcontext

    getcontext().prec = 60
    d = Decimal(v.numerator) / Decimal(v.denominator)
    exp = d.adjusted()
    q = Decimal(1).scaleb(exp - 9)
    return format(d.quantize(q, rounding=ROUND_HALF_UP).normalize(), "f")


def spec_example():
    v = Fraction(1577 - 1505, 1505)
    return {
        "expr": "(1577-1505)/1505",
        "exact": f"{v.numerator}/{v.denominator}",
        "ten_significant": ten_significant(v),
        "eight_decimal_places": f"{float(v):.8f}",
    }


def document():
    return {"seed": SEED, "example": spec_example(), "cases": corpus()}


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--write", action="store_true")
    parser.add_argument("--check", action="store_true")
    args = parser.parse_args()
    doc = document()
    if args.write:
        FROZEN.write_text(json.dumps(doc, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")
        print(f"wrote {len(doc['cases'])} cases to {FROZEN}")
        return 0
    if args.check:
        frozen = json.loads(FROZEN.read_text(encoding="utf-8"))
        if frozen != doc:
            print("frozen calculator corpus differs from the oracle", file=sys.stderr)
            return 1
        print(f"calculator oracle: {len(doc['cases'])} cases agree; example {doc['example']}")
        return 0
    print(json.dumps(doc["example"]))
    return 0


if __name__ == "__main__":
    sys.exit(main())
