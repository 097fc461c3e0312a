"""Built-in curve corpus used by ``verify`` and the acceptance suite."""
import math

import numpy as np

from .curves import ConvexCurve

CORPUS_NAMES = ("line", "parabola", "cubic", "cantor", "random_pl")
CORPUS_R = (2 ** 8, 2 ** 10, 2 ** 12)
CORPUS_EPS = (1 / 4, 1 / 5, 1 / 10)


def cantor_depth(R: float) -> int:
    """Truncation depth ceil(log_3 R) + 4."""
    return int(math.ceil(math.log(R, 3) - 1e-12)) + 4


def random_piecewise_linear(seed: int = 0, pieces: int = 8) -> ConvexCurve:
    rng = np.random.Generator(np.random.Philox(seed))
    inner = np.sort(rng.uniform(0.05, 0.95, pieces - 1))
    xs = np.concatenate([[0.0], inner, [1.0]])
    slopes = np.sort(rng.uniform(0.0, 1.0, pieces))
    slopes[0] = 0.0
    ys = np.concatenate([[0.0], np.cumsum(slopes * np.diff(xs))])
    return ConvexCurve.piecewise_linear(xs, ys, label=f"random_pl[{seed}]")


def corpus_curve(name: str, R: float = 2 ** 12) -> ConvexCurve:
    if name == "line":
        return ConvexCurve.polynomial([0.0, 0.5], label="line")
    if name == "parabola":
        return ConvexCurve.parabola(0.5)
    if name == "cubic":
        return ConvexCurve.polynomial([0.0, 0.0, 0.0, 1.0 / 3.0], label="cubic")
    if name == "cantor":
        return ConvexCurve.cantor_staircase(1.0 / 3.0, cantor_depth(R))
    if name == "random_pl":
        return random_piecewise_linear(0)
    raise KeyError(name)


def corpus(R: float = 2 ** 12):
    return {name: corpus_curve(name, R) for name in CORPUS_NAMES}
