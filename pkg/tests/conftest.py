"""Shared helpers: deterministic generators for valid corona pairs."""

import numpy as np
import pytest

from stabilize.blaschke import (
    BlaschkeProduct,
    axis_sign_condition,
    corona_delta,
)


def random_symmetric_product(rng, degree: int, y_range=(0.3, 2.5),
                             x_range=(0.2, 2.2), min_sep: float = 0.12):
    """Random real-symmetric product of the requested degree.

    Zeros keep a minimum mutual distance so downstream interpolation at
    them stays well conditioned.
    """
    for _ in range(200):
        zeros = []
        remaining = degree
        while remaining > 0:
            if remaining == 1 or rng.random() < 0.4:
                zeros.append(complex(0.0, rng.uniform(*y_range)))
                remaining -= 1
            else:
                x = rng.uniform(*x_range)
                y = rng.uniform(*y_range)
                zeros.append(complex(x, y))
                zeros.append(complex(-x, y))
                remaining -= 2
        ok = all(abs(a - b) >= min_sep
                 for i, a in enumerate(zeros) for b in zeros[i + 1:])
        if ok:
            return BlaschkeProduct.from_zeros(zeros)
    raise RuntimeError(f"could not place {degree} separated zeros")


def generate_valid_pair(rng, deg1: int, deg2: int, max_tries: int = 400):
    """A pair passing the corona and single-sign conditions, with its epsilon.

    The zero sets live in separated height bands (f1 low, f2 high), so
    f1 is positive above its zeros where the sublevel set of f2 usually
    sits; candidates are still measured and screened, and resampled when
    delta is too small or the sign condition fails at every epsilon of a
    fixed ladder.
    """
    for _ in range(max_tries):
        f2 = random_symmetric_product(rng, deg2, y_range=(1.6, 3.2),
                                      x_range=(0.8, 2.8))
        f1 = random_symmetric_product(rng, deg1, y_range=(0.25, 0.95),
                                      x_range=(0.2, 2.5))
        delta = corona_delta(f1, f2, resolution=128)
        if delta < 0.02:
            continue
        for eps in (0.3, 0.15, 0.08):
            res = axis_sign_condition(f1, f2, eps)
            if res.ok:
                return f1, f2, eps, delta
    raise RuntimeError(f"no valid pair found for degrees ({deg1}, {deg2})")


VIOLATING_PAIRS = [
    # f1 changes sign between (or inside) sublevel intervals of f2
    ([2.0j], [1.0j, 4.0j]),
    ([1.5j], [0.8j, 3.0j]),
    ([2.5j], [1.2j, 4.5j], ),
    ([2.8j], [1.5j, 4.2j]),
    ([0.6j, 2.2j], [1.4j, 0.4 + 3.0j, -0.4 + 3.0j, 0.2j]),
    ([3.0j], [1.8j, 5.0j]),
]


def violating_pair(k: int):
    z1, z2 = VIOLATING_PAIRS[k][:2]
    return (BlaschkeProduct.from_zeros(z1), BlaschkeProduct.from_zeros(z2))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(42)
