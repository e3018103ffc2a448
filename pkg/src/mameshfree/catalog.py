"""Manufactured Monge-Ampere problems with known exact solutions."""
from __future__ import annotations

import numpy as np

from .geometry import Domain
from .operator import Problem


def _ma1_u(x, y):
    return np.exp((x**2 + y**2) / 2)


def _ma1_f(x, y):
    return (1 + x**2 + y**2) * np.exp(x**2 + y**2)


def _ma2_u(x, y):
    return (x**2 + y**2) / 2


def _ma2_f(x, y):
    return np.ones(np.shape(x))


def _ma3_u(x, y):
    return x**2 + y**2 + np.exp(x)


def _ma3_f(x, y):
    return 2 * (2 + np.exp(x))


_CATALOG = {
    "MA1": (_ma1_u, _ma1_f),
    "MA2": (_ma2_u, _ma2_f),
    "MA3": (_ma3_u, _ma3_f),
}

NAMES = tuple(_CATALOG)


def manufactured(name: str, domain: Domain) -> Problem:
    """Problem with g = u* on the boundary and f = det D^2 u*."""
    try:
        u, f = _CATALOG[name.upper()]
    except KeyError:
        raise KeyError(f"unknown catalog problem {name!r}; expected one of {list(_CATALOG)}") from None
    return Problem(domain=domain, f=f, g=u, exact=u, name=name.upper())
