"""Seeded random expression corpus shared by the expression tests."""

import random

_FUNCS = ("sin", "cos", "exp", "tanh")


def _gen(rng: random.Random, dim: int, depth: int) -> str:
    if depth == 0 or rng.random() < 0.3:
        if rng.random() < 0.5:
            return f"x{rng.randrange(dim) + 1}"
        return f"{rng.uniform(-2, 2):.3f}"
    kind = rng.randrange(5)
    if kind == 0:
        return f"({_gen(rng, dim, depth - 1)} + {_gen(rng, dim, depth - 1)})"
    if kind == 1:
        return f"({_gen(rng, dim, depth - 1)} - {_gen(rng, dim, depth - 1)})"
    if kind == 2:
        return f"({_gen(rng, dim, depth - 1)} * {_gen(rng, dim, depth - 1)})"
    if kind == 3:
        return f"{rng.choice(_FUNCS)}(0.5 * {_gen(rng, dim, depth - 1)})"
    return f"({_gen(rng, dim, depth - 1)})^{rng.randrange(2, 4)}"


def corpus(n: int, dim: int, seed: int = 0) -> list[str]:
    rng = random.Random(seed)
    return [_gen(rng, dim, rng.randrange(1, 4)) for _ in range(n)]
