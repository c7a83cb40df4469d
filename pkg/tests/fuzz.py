"""Random parser inputs: grammar-shaped token soup plus mutations of real files."""

import random

from conftest import PROBLEMS

VOCAB = [
    "independent", "dependent", "antifield", "tier", "equation", "compat", "density",
    "cosymmetry", "current", "x", "t", "y", "u", "v", "c", "a", "u_x", "u_t", "u_xx", "u_xt",
    "u_xxx", "c_x", "D_x", "D_t", "D_y", "1", "2", "0", "1/2", "3/0", "99999999999",
    ";", ",", ":", "=", "+", "-", "*", "/", "^", "(", ")", "[", "]", "#", "\n", " ", "é", "$",
]

SEEDS = [p.read_text(encoding="utf-8") for p in sorted(PROBLEMS.glob("*.eq"))]


def _soup(rnd: random.Random) -> str:
    head = "independent x, t; dependent u; " if rnd.random() < 0.6 else ""
    return head + " ".join(rnd.choice(VOCAB) for _ in range(rnd.randint(0, 40)))


def _mutate(rnd: random.Random) -> str:
    text = list(rnd.choice(SEEDS))
    for _ in range(rnd.randint(1, 6)):
        op = rnd.random()
        k = rnd.randrange(len(text) + 1)
        if op < 0.4 and text:
            del text[min(k, len(text) - 1)]
        elif op < 0.8:
            text.insert(k, rnd.choice(VOCAB))
        else:
            j = rnd.randrange(len(text) + 1)
            text[k:k] = text[j:j + rnd.randint(1, 20)]
    return "".join(text)


def _nested(rnd: random.Random) -> str:
    depth = rnd.randint(1, 400)
    body = "(" * depth + "u" + ")" * rnd.choice((depth, depth - 1))
    return f"independent x, t; dependent u; equation u_t = {body};"


def generate(rnd: random.Random) -> str:
    r = rnd.random()
    if r < 0.45:
        return _soup(rnd)
    if r < 0.97:
        return _mutate(rnd)
    return _nested(rnd)
