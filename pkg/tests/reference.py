"""Shared test references: oracle adapters and a fixed 200-digit evaluator.

The adapters translate scheme parameters into Fock-space states so the
analytic engine can be compared against brute-force linear algebra. The
200-digit evaluator is a separate transcription of the one-open signal and
bracket noise path run at fixed high precision; it serves as the stability
reference for very large atom numbers.
"""

from __future__ import annotations

import mpmath as mp
import numpy as np

from gie import oracle as o

REFERENCE_DPS = 200


def oracle_open(n: int, gamma: float, lam: float, phase_diff: float, reps: int = 2) -> tuple[float, float]:
    """(signal, variance) for the one-open scheme with split phase φ = 0, ϕ = −Δ."""
    state = o.interacted_state(n, gamma, lam)
    varphi = -phase_diff
    return o.covariance_S(state, varphi), o.estimator_variance_S(state, varphi, reps)


def oracle_closed_state(n: int, gamma: float, lam: float) -> o.JointState:
    return o.interacted_state(n, gamma, lam)


def oracle_closed_ops(mu: float, nu: float) -> tuple[o.SpinOp, o.SpinOp]:
    # split phases are zero, so the closing phases equal μ and ν
    return o.SpinOp.phi(o.Side.AB, mu), o.SpinOp.phi(o.Side.CD, nu)


def oracle_closed(n: int, gamma: float, lam: float, mu: float, nu: float, reps: int = 2):
    """(signal, variance, moment table) with both interferometers closed."""
    state = oracle_closed_state(n, gamma, lam)
    a, b = oracle_closed_ops(mu, nu)
    table = o.moment_table(state, a, b)
    return table.covariance, o.estimator_variance(state, a, b, reps), table


def close_enough(a: float, b: float, rel: float = 1e-9, abs_: float = 1e-10) -> bool:
    return abs(a - b) <= max(abs_, rel * max(abs(a), abs(b)))


def _pow_cos(x, k):
    return mp.power(mp.cos(x), k)


def reference_open(n, gamma: float, lam: float, phase_diff: float, reps: float) -> tuple[float, float]:
    """(signal, variance) of the one-open scheme from the bracket path at 200 digits."""
    with mp.workdps(REFERENCE_DPS):
        N = mp.mpf(n)
        g, l, d, m = mp.mpf(gamma), mp.mpf(lam), mp.mpf(phase_diff), mp.mpf(reps)
        nu = -d
        s = N * N / 4 * mp.sin(d) * _pow_cos(g, N - 1) * _pow_cos(l, N - 1) * mp.sin(l)
        b = 2 * (N + 1)
        b += (N - 1) * mp.cos(2 * nu) * _pow_cos(2 * g, N - 2) * _pow_cos(2 * l, N - 2) * (2 + N * (mp.cos(4 * l) - 1))
        b += 4 * N * mp.cos(nu) ** 2 * _pow_cos(g, 2 * N - 2) * _pow_cos(l, 2 * N - 2) * (
            2 * N * mp.sin(l) ** 2 + mp.cos(l) ** 2 - 2
        )
        var = (N * N * b / 64 - s * s) / m
        return float(s), float(var)


def reference_log_cos_pow(x: float, n) -> float:
    with mp.workdps(REFERENCE_DPS):
        return float(mp.mpf(n) * mp.log(abs(mp.cos(mp.mpf(x)))))


def coherent_product_mixture(n: int, rng: np.random.Generator, parts: int):
    w = rng.random(parts)
    w /= w.sum()
    return [
        (
            float(wi),
            o.JointState.product(
                o.coherent_split_state(n, rng.uniform(-np.pi, np.pi)),
                o.coherent_split_state(n, rng.uniform(-np.pi, np.pi)),
            ),
        )
        for wi in w
    ]
