"""Synthetic grouped sales data for demos and benchmarks."""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass

import numpy as np

from .grouping import AttributeSchema, GroupStructure, build_structure, build_summing_matrix

__all__ = ["Benchmark", "correlated_bottom_benchmark", "demo_schema", "demo_levels", "demo_sales"]


@dataclass(frozen=True)
class Benchmark:
    structure: GroupStructure
    Y: np.ndarray
    s: int
    h: int


def correlated_bottom_benchmark(seed: int, T: int = 240, s: int = 12, h: int = 4,
                                noise_sd: float = 0.5, swap_sd: float = 2.0, seasonal_amp: float = 2.0,
                                drift_sd: float = 0.15, level: float = 50.0) -> Benchmark:
    """Two brands by two genders sharing one slowly evolving seasonal pattern.

    Bottom series are ``level + weight * pattern_t + noise``. The pattern is
    a seasonal random walk started from a sine wave. Besides small
    idiosyncratic noise, each bottom series carries substitution shocks
    with a brand-by-gender interaction pattern. These cancel in every
    aggregate, so aggregates are smooth while the bottom level is dominated
    by noise.
    """
    rng = np.random.default_rng(seed)
    schema = AttributeSchema((("brand", ("b1", "b2")), ("gender", ("f", "m"))))
    bottom = [schema.key(brand=b, gender=g) for b in ("b1", "b2") for g in ("f", "m")]
    structure = build_structure(schema, [["brand"], ["gender"], ["brand", "gender"]], bottom)
    phase = rng.uniform(0, 2 * np.pi)
    pattern = np.empty(T)
    pattern[:s] = seasonal_amp * np.sin(2 * np.pi * np.arange(s) / s + phase)
    steps = rng.normal(0.0, drift_sd * seasonal_amp, T)
    for t in range(s, T):
        pattern[t] = pattern[t - s] + steps[t]
    weights = rng.uniform(0.8, 1.2, len(bottom))
    # bottom order (b1,f), (b1,m), (b2,f), (b2,m); the +--+ sign pattern
    # cancels in the brand, gender and total sums alike
    swap = np.outer([1.0, -1.0, -1.0, 1.0], rng.normal(0.0, swap_sd, T))
    B = level + weights[:, None] * pattern[None, :] + swap + rng.normal(0.0, noise_sd, (len(bottom), T))
    S = build_summing_matrix(structure).entries
    return Benchmark(structure, S @ B, s, h)


def demo_schema() -> AttributeSchema:
    return AttributeSchema((
        ("brand", ("brand_a", "brand_b")),
        ("gender", ("girl", "boy")),
        ("season_status", ("in_season", "off_season")),
    ))


def demo_levels():
    return [["brand"], ["gender"], ["season_status"], ["brand", "gender"], ["brand", "season_status"]]


def demo_sales(seed: int = 2016, start: str = "2016-12-11", weeks: int = 110, s: int = 52):
    """Daily transaction rows ``(date, attributes..., quantity)`` for the demo.

    Weekly demand per bottom series has a yearly cycle, a brand-level trend
    and Poisson noise; each week's units are spread over random days so the
    weekly bucketing has real work to do.
    """
    rng = np.random.default_rng(seed)
    schema = demo_schema()
    first = _dt.date.fromisoformat(start)
    t = np.arange(weeks)
    rows = []
    combos = [(b, g, ss) for b in schema.values("brand") for g in schema.values("gender")
              for ss in schema.values("season_status")]
    for j, (b, g, ss) in enumerate(combos):
        base = rng.uniform(15, 40) * (1.6 if ss == "in_season" else 0.7)
        trend = 1.0 + (0.004 if b == "brand_a" else 0.002) * t
        phase = 0.0 if ss == "in_season" else np.pi
        yearly = 1.0 + 0.45 * np.sin(2 * np.pi * t / s + phase + 0.3 * j)
        lam = np.maximum(base * trend * yearly, 0.5)
        units = rng.poisson(lam)
        for w in range(weeks):
            left = int(units[w])
            while left > 0:
                q = int(min(left, rng.integers(1, 6)))
                day = first + _dt.timedelta(weeks=w, days=int(rng.integers(0, 7)))
                rows.append((day.isoformat(), b, g, ss, q))
                left -= q
    rows.sort()
    return rows
