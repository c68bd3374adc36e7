"""Benchmark problem definitions: data, sources and exact solutions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .mesh import Bounds

EPS_FLOOR = 1e-14


def composite_profile(x):
    """Discontinuous 1D profile: smoothed Gaussian, square pulse, triangle,
    smoothed half-ellipse, zero elsewhere; values in [0, 1]."""
    x = np.asarray(x, dtype=float)
    a, z, delta, alpha = 0.86, 0.14, 0.005, 10.0
    beta = np.log(2.0) / (36.0 * delta**2)

    def g(center):
        return np.exp(-beta * (x - center) ** 2)

    def f(center):
        return np.sqrt(np.maximum(1.0 - alpha**2 * (x - center) ** 2, 0.0))

    out = np.zeros_like(x)
    m = (x >= 0.04) & (x <= 0.24)
    out[m] = ((g(z - delta) + 4.0 * g(z) + g(z + delta)) / 6.0)[m]
    m = (x >= 0.28) & (x <= 0.48)
    out[m] = 1.0
    m = (x >= 0.52) & (x <= 0.72)
    out[m] = (1.0 - 10.0 * np.abs(x - 0.62))[m]
    m = (x >= 0.76) & (x <= 0.96)
    out[m] = ((f(a - delta) + 4.0 * f(a) + f(a + delta)) / 6.0)[m]
    return out


def reaction_exact_1d(x):
    return np.cos(2.0 * np.pi * x) ** 4 / 9.0 + EPS_FLOOR


def reaction_source_1d(beta):
    """Source making reaction_exact_1d the steady solution of u' + beta u = s."""

    def s(x):
        c = np.cos(2.0 * np.pi * x)
        sn = np.sin(2.0 * np.pi * x)
        return beta * (c**4 / 9.0 + EPS_FLOOR) - (8.0 * np.pi / 9.0) * c**3 * sn

    return s


def reaction_exact_2d(x, y):
    return np.cos(3.0 * np.pi * x) ** 4 * np.cos(3.0 * np.pi * y) ** 4 / 9.0


def reaction_source_2d(beta):
    """Source making reaction_exact_2d steady for u_x + u_y + beta u = s."""

    def s(x, y):
        cx, cy = np.cos(3.0 * np.pi * x), np.cos(3.0 * np.pi * y)
        sx, sy = np.sin(3.0 * np.pi * x), np.sin(3.0 * np.pi * y)
        ux = -(4.0 * np.pi / 3.0) * cx**3 * sx * cy**4
        uy = -(4.0 * np.pi / 3.0) * cy**3 * sy * cx**4
        return ux + uy + beta * cx**4 * cy**4 / 9.0

    return s


@dataclass(frozen=True)
class Problem1D:
    name: str
    box: tuple[float, float]
    bc: str
    initial: Callable | None = None
    exact: Callable | None = None             # steady exact u(x) or transient u(x, t)
    inflow: Callable | None = None
    source: Callable | None = None
    reaction: float = 0.0
    bounds: Bounds | None = None
    kind: str = "steady"                      # steady | transient | scan
    default_lambda: float = 1.0


@dataclass(frozen=True)
class Problem2D:
    name: str
    box: tuple[tuple[float, float], tuple[float, float]]
    bc: str
    initial: Callable | None = None
    exact: Callable | None = None
    inflow: tuple | None = None               # (g_left(y, t), g_bottom(x, t))
    source: Callable | None = None
    reaction: float = 0.0
    bounds: Bounds | None = None
    kind: str = "steady"
    default_lambda: float = 5.0


BETA_REACTION = 6000.0

PROBLEMS_1D = {
    "transport-1d": Problem1D(
        name="transport-1d",
        box=(0.0, 1.0),
        bc="periodic",
        initial=lambda x: np.sin(2.0 * np.pi * x),
        exact=lambda x, t: np.sin(2.0 * np.pi * (x - t)),
        bounds=Bounds(-1.0, 1.0),
        kind="transient",
        default_lambda=1.0,
    ),
    "steady-1d": Problem1D(
        name="steady-1d",
        box=(0.0, 1.0),
        bc="inflow",
        initial=lambda x: np.zeros_like(x),
        exact=lambda x: np.sin(2.0 * np.pi * x),
        inflow=lambda t: 0.0,
        source=lambda x: 2.0 * np.pi * np.cos(2.0 * np.pi * x),
        bounds=Bounds(-1.0, 1.0),
        kind="steady",
        default_lambda=1.0,
    ),
    "zs-profile-1d": Problem1D(
        name="zs-profile-1d",
        box=(0.0, 1.0),
        bc="periodic",
        initial=composite_profile,
        bounds=Bounds(0.0, 1.0),
        kind="scan",
        default_lambda=0.25,
    ),
    "adv-reaction-1d": Problem1D(
        name="adv-reaction-1d",
        box=(0.0, 3.0),
        bc="inflow",
        initial=lambda x: np.zeros_like(x),
        exact=reaction_exact_1d,
        inflow=lambda t: 1.0 / 9.0 + EPS_FLOOR,
        source=reaction_source_1d(BETA_REACTION),
        reaction=BETA_REACTION,
        bounds=Bounds(0.0, None),
        kind="steady",
        default_lambda=1.0,
    ),
}

UNIT_SQUARE = ((0.0, 1.0), (0.0, 1.0))

PROBLEMS_2D = {
    "pulse-2d": Problem2D(
        name="pulse-2d",
        box=UNIT_SQUARE,
        bc="periodic",
        initial=lambda x, y: 1.0 * ((np.abs(x - 0.25) + np.abs(y - 0.25)) <= 0.15),
        bounds=Bounds(0.0, 1.0),
        kind="scan",
        default_lambda=1.0,
    ),
    "steady-smooth-2d": Problem2D(
        name="steady-smooth-2d",
        box=UNIT_SQUARE,
        bc="inflow",
        initial=lambda x, y: np.zeros_like(x * y),
        exact=lambda x, y: np.sin(2.0 * np.pi * (x - y)),
        inflow=(lambda y, t: -np.sin(2.0 * np.pi * y), lambda x, t: np.sin(2.0 * np.pi * x)),
        bounds=Bounds(-1.0, 1.0),
        kind="steady",
        default_lambda=5.0,
    ),
    "steady-disc-2d": Problem2D(
        name="steady-disc-2d",
        box=UNIT_SQUARE,
        bc="inflow",
        initial=lambda x, y: np.zeros_like(x * y),
        exact=lambda x, y: np.sign(x - y) * np.cos(np.pi * (x - y)),
        inflow=(lambda y, t: -np.cos(np.pi * y), lambda x, t: np.cos(np.pi * x)),
        bounds=Bounds(-1.0, 1.0),
        kind="scan",
        default_lambda=5.0,
    ),
    "adv-reaction-2d": Problem2D(
        name="adv-reaction-2d",
        box=UNIT_SQUARE,
        bc="inflow",
        initial=lambda x, y: np.zeros_like(x * y),
        exact=reaction_exact_2d,
        inflow=(lambda y, t: np.cos(3.0 * np.pi * y) ** 4 / 9.0,
                lambda x, t: np.cos(3.0 * np.pi * x) ** 4 / 9.0),
        source=reaction_source_2d(BETA_REACTION),
        reaction=BETA_REACTION,
        bounds=Bounds(0.0, None),
        kind="steady",
        default_lambda=5.0,
    ),
}


def box_indicator_3d(x, y, z):
    return 1.0 * ((np.abs(x - 0.5) <= 0.25) & (np.abs(y - 0.5) <= 0.25)
                  & (np.abs(z - 0.5) <= 0.25))
