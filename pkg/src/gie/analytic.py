"""Closed-form signal, noise and SNR for the two-interferometer scheme.

Every expression is evaluated in mpmath at a working precision chosen from
N and the smallest coupling, so cancellations of order λ²/N² in the noise
survive at N ~ 1e16 and λ ~ 1e-20. Results are returned as floats.

Phase conventions:

* one-open scheme: ``phase_diff`` is Δ = φ − ϕ. The noise depends on
  ν = ϕ − φ = −Δ only through even functions, so Δ alone fixes everything.
* both-closed scheme: μ = ϕ − φ and ν = ϕ′ − φ′.
"""

from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import mpmath
import numpy as np
from scipy.special import gammaln


class _ThreadContext(threading.local):
    def __init__(self):
        self.ctx = mpmath.MPContext()


class _ContextProxy:
    """Forwards to a private mpmath context per thread, since workdps on the shared one races."""

    _local = _ThreadContext()

    def __getattr__(self, name):
        return getattr(self._local.ctx, name)


mp = _ContextProxy()

EXACT_REGIME_MAX_ATOMS = 64
MAX_DPS = 1200
PURITY_SUM_MAX_ATOMS = 10**6
PURITY_ASYMPTOTIC_GUARD = 0.1
SIMPLIFIED_WARN_LEVEL = 0.1


class DegenerateVarianceError(ArithmeticError):
    """Raised when a noise expression is zero or negative, so the SNR is undefined."""


class SignedLog(NamedTuple):
    sign: int  # -1, 0 or +1
    log: float  # natural log of the magnitude; -inf for an exact zero

    def value(self) -> float:
        return self.sign * math.exp(self.log) if self.sign else 0.0


def _log_cos_reduced(r: float) -> float:
    # r in [-pi/2, pi/2]; cos r >= 0
    if abs(r) < 1e-4:
        r2 = r * r
        return -r2 / 2 - r2 * r2 / 12 - r2**3 / 45
    s = math.sin(r / 2)
    arg = -2.0 * s * s
    if arg <= -1.0:
        return -math.inf
    return math.log1p(arg)


def log_cos_pow(x: float, n) -> SignedLog:
    """Signed log of cos(x)**n without forming cos(x)**n.

    ``n`` may be any non-negative count up to ~1e300; integer parity decides the
    sign when cos x < 0. An exact zero (cos x = 0, n > 0) comes back as
    ``SignedLog(0, -inf)``.
    """
    if n == 0:
        return SignedLog(1, 0.0)
    k = round(x / math.pi)
    r = x - k * math.pi
    if abs(r) > math.pi / 2:
        k += 1 if r > 0 else -1
        r = x - k * math.pi
    lc = _log_cos_reduced(r)
    if lc == -math.inf:
        return SignedLog(0, -math.inf)
    sign = 1
    if k % 2:
        if float(n) != math.floor(float(n)):
            raise ValueError("non-integer power of a negative cosine")
        if int(n) % 2:
            sign = -1
    return SignedLog(sign, float(n) * lc)


def working_dps(n_atoms, *couplings: float) -> int:
    """Decimal digits needed for the closed forms at this N and coupling scale."""
    digits = 30 + 4 * math.log10(max(float(n_atoms), 1.0))
    small = [abs(float(c)) for c in couplings if c != 0]
    if small:
        digits += 2 * max(0.0, -math.log10(min(small)))
    return int(min(MAX_DPS, math.ceil(digits)))


def _atom_count(n) -> int:
    if isinstance(n, (float, np.floating)):
        if not math.isfinite(n) or n != math.floor(n):
            raise ValueError(f"atom count must be a whole number, got {n!r}")
        n = int(n)
    n = int(n)
    if n < 1:
        raise ValueError(f"atom count must be >= 1, got {n}")
    return n


def _reps(m) -> float:
    if not m >= 2:
        raise ValueError(f"repetitions must be >= 2, got {m!r}")
    return float(m)


def regime_for(n: int) -> str:
    return "exact" if n <= EXACT_REGIME_MAX_ATOMS else "log-domain-approx"


@dataclass(frozen=True)
class OpenSchemeParams:
    """Inputs for the scheme where only the ab interferometer is closed."""

    n_atoms: int
    self_phase: float  # γ
    cross_phase: float  # λ
    phase_diff: float  # Δ = φ − ϕ
    reps: float = 2

    def __post_init__(self):
        object.__setattr__(self, "n_atoms", _atom_count(self.n_atoms))
        _reps(self.reps)

    @property
    def nu(self) -> float:
        return -self.phase_diff


@dataclass(frozen=True)
class ClosedSchemeParams:
    """Inputs for the scheme where both interferometers are closed."""

    n_atoms: int
    self_phase: float
    cross_phase: float
    mu: float  # ϕ − φ
    nu: float  # ϕ′ − φ′
    reps: float = 2

    def __post_init__(self):
        object.__setattr__(self, "n_atoms", _atom_count(self.n_atoms))
        _reps(self.reps)


@dataclass(frozen=True)
class SnrReport:
    signal: float
    variance: float
    snr: float
    regime: str
    diagnostics: dict = field(default_factory=dict)


class _Ctx:
    """mpmath working context bound to one parameter set."""

    def __init__(self, n: int, gamma: float, lam: float):
        self.dps = working_dps(n, gamma, lam)
        self.n = n

    def __enter__(self):
        self._wd = mp.workdps(self.dps)
        self._wd.__enter__()
        self.N = mp.mpf(self.n)
        return self

    def __exit__(self, *exc):
        return self._wd.__exit__(*exc)


def _cpow(x, k):
    # cos(x)**k with k possibly negative when multiplied by a vanishing (N-1) factor
    c = mp.cos(x)
    if k == 0:
        return mp.mpf(1)
    return c**k


# --- one-open scheme ---------------------------------------------------------


def _signal_open_mp(N, g, lam, delta):
    return N**2 / 4 * mp.sin(delta) * _cpow(g, N - 1) * _cpow(lam, N - 1) * mp.sin(lam)


def signal_open(p: OpenSchemeParams) -> float:
    """Covariance ⟨J_ϕ^ab J_z^cd⟩ − ⟨J_ϕ^ab⟩⟨J_z^cd⟩ of the one-open scheme."""
    if p.cross_phase == 0 or p.phase_diff == 0:
        return 0.0
    with _Ctx(p.n_atoms, p.self_phase, p.cross_phase) as c:
        return float(_signal_open_mp(c.N, mp.mpf(p.self_phase), mp.mpf(p.cross_phase), mp.mpf(p.phase_diff)))


def _moments_open_mp(N, g, lam, nu):
    c2 = lambda k: _cpow(2 * lam, k)  # noqa: E731
    x = N / 2 * mp.cos(nu) * _cpow(g, N - 1) * _cpow(lam, N)
    xy = -(N**2) / 4 * mp.sin(nu) * _cpow(g, N - 1) * _cpow(lam, N - 1) * mp.sin(lam)
    xy2 = N**2 / 8 * mp.cos(nu) * _cpow(g, N - 1) * (
        _cpow(lam, N) - (N - 1) * _cpow(lam, N - 2) * mp.sin(lam) ** 2 if N > 1 else _cpow(lam, N)
    )
    if N > 1:
        x2 = N / 8 * (N + 1 + (N - 1) * mp.cos(2 * nu) * _cpow(2 * g, N - 2) * c2(N))
        x2y = -(N**2) * (N - 1) / 16 * mp.sin(2 * nu) * _cpow(2 * g, N - 2) * c2(N - 1) * mp.sin(2 * lam)
        x2y2 = (N**2) * (N - 1) / 32 * mp.cos(2 * nu) * _cpow(2 * g, N - 2) * (
            c2(N) - (N - 1) * c2(N - 2) * mp.sin(2 * lam) ** 2
        ) + N**2 * (N + 1) / 32
    else:
        x2 = N / 8 * (N + 1)
        x2y = mp.mpf(0)
        x2y2 = N**2 * (N + 1) / 32
    return {
        (1, 0): x,
        (0, 1): mp.mpf(0),
        (1, 1): xy,
        (2, 0): x2,
        (0, 2): N / 4,
        (2, 1): x2y,
        (1, 2): xy2,
        (2, 2): x2y2,
    }


def moments_open(p: OpenSchemeParams) -> dict:
    """Raw moments ``{(i, j): ⟨X^i Y^j⟩}`` with X = J_ϕ^ab and Y = J_z^cd."""
    with _Ctx(p.n_atoms, p.self_phase, p.cross_phase) as c:
        m = _moments_open_mp(c.N, mp.mpf(p.self_phase), mp.mpf(p.cross_phase), mp.mpf(p.nu))
        return {k: float(v) for k, v in m.items()}


def _central22(m):
    x, y = m[(1, 0)], m[(0, 1)]
    return (
        m[(2, 2)]
        - 2 * y * m[(2, 1)]
        - 2 * x * m[(1, 2)]
        + y**2 * m[(2, 0)]
        + x**2 * m[(0, 2)]
        + 4 * x * y * m[(1, 1)]
        - 3 * x**2 * y**2
    )


def _covariance(m):
    return m[(1, 1)] - m[(1, 0)] * m[(0, 1)]


def _bracket_open_mp(N, g, lam, nu):
    # the closed-form 1/64 (...) bracket, without the N² and 1/M factors
    core = 2 * (N + 1)
    if N > 1:
        core += (N - 1) * mp.cos(2 * nu) * _cpow(2 * g, N - 2) * _cpow(2 * lam, N - 2) * (2 + N * (mp.cos(4 * lam) - 1))
    core += 4 * N * mp.cos(nu) ** 2 * _cpow(g, 2 * N - 2) * _cpow(lam, 2 * N - 2) * (
        2 * N * mp.sin(lam) ** 2 + mp.cos(lam) ** 2 - 2
    )
    return core / 64


def _variance_open_mp(N, g, lam, nu, reps, method):
    if method == "moments":
        m = _moments_open_mp(N, g, lam, nu)
        return (_central22(m) - _covariance(m) ** 2) / reps
    if method == "bracket":
        # N²·bracket equals E[(X−x)²(Y−y)²]; subtracting S² gives κ22 + κ20κ02 + S²
        s = _signal_open_mp(N, g, lam, -nu)
        return (N**2 * _bracket_open_mp(N, g, lam, nu) - s**2) / reps
    raise ValueError(f"unknown variance method {method!r} (use 'moments' or 'bracket')")


def variance_open(p: OpenSchemeParams, method: str = "moments") -> float:
    """Large-M variance (κ22 + κ20κ02 + S²)/M of the covariance estimator."""
    with _Ctx(p.n_atoms, p.self_phase, p.cross_phase) as c:
        v = _variance_open_mp(
            c.N, mp.mpf(p.self_phase), mp.mpf(p.cross_phase), mp.mpf(p.nu), mp.mpf(p.reps), method
        )
        return float(v)


def variance_open_literal(p: OpenSchemeParams) -> float:
    """The closed-form noise bracket taken literally (no N², no 1/M)."""
    with _Ctx(p.n_atoms, p.self_phase, p.cross_phase) as c:
        return float(_bracket_open_mp(c.N, mp.mpf(p.self_phase), mp.mpf(p.cross_phase), mp.mpf(p.nu)))


@dataclass(frozen=True)
class CalibrationReport:
    """How the literal noise bracket relates to the definitional variance."""

    n_atoms: int
    literal: float  # bracket taken literally
    definitional: float  # M·Var from moments
    scaled_bracket: float  # N²·bracket
    signal_squared: float

    @property
    def literal_ratio(self) -> float:
        return self.definitional / self.literal if self.literal else math.nan

    @property
    def offset_residual(self) -> float:
        """N²·bracket − S² − M·Var; zero when the calibrated reading holds."""
        return self.scaled_bracket - self.signal_squared - self.definitional

    def lines(self) -> list[str]:
        return [
            f"N={self.n_atoms}: literal bracket = {self.literal!r}",
            f"  M*Var (moment assembly) = {self.definitional!r}",
            f"  ratio M*Var / literal = {self.literal_ratio!r}",
            f"  N^2*bracket - S^2 - M*Var = {self.offset_residual!r}",
        ]


def fullvar_calibration(n_atoms: int, self_phase: float, cross_phase: float, phase_diff: float) -> CalibrationReport:
    p = OpenSchemeParams(n_atoms, self_phase, cross_phase, phase_diff, reps=2)
    with _Ctx(p.n_atoms, p.self_phase, p.cross_phase) as c:
        g, lam, nu = mp.mpf(self_phase), mp.mpf(cross_phase), mp.mpf(p.nu)
        br = _bracket_open_mp(c.N, g, lam, nu)
        dv = _variance_open_mp(c.N, g, lam, nu, 1, "moments")
        s = _signal_open_mp(c.N, g, lam, mp.mpf(phase_diff))
        return CalibrationReport(p.n_atoms, float(br), float(dv), float(c.N**2 * br), float(s**2))


def _diagnostics(p, dps: int) -> dict:
    n = p.n_atoms
    d = {
        "dps": dps,
        "log_cos_pow_self": log_cos_pow(p.self_phase, n - 1).log,
        "log_cos_pow_cross": log_cos_pow(p.cross_phase, n - 1).log,
        "log_n_squared": 2 * math.log(n),
    }
    return d


def _report(signal, variance, p, dps) -> SnrReport:
    if not variance > 0:
        raise DegenerateVarianceError(f"variance is {variance!r}; SNR undefined")
    diag = _diagnostics(p, dps)
    diag["log_abs_signal"] = math.log(abs(signal)) if signal else -math.inf
    diag["log_variance"] = math.log(variance)
    return SnrReport(signal, variance, abs(signal) / math.sqrt(variance), regime_for(p.n_atoms), diag)


def snr_open(p: OpenSchemeParams, method: str = "moments") -> SnrReport:
    ctx = _Ctx(p.n_atoms, p.self_phase, p.cross_phase)
    with ctx as c:
        g, lam = mp.mpf(p.self_phase), mp.mpf(p.cross_phase)
        s = _signal_open_mp(c.N, g, lam, mp.mpf(p.phase_diff))
        v = _variance_open_mp(c.N, g, lam, mp.mpf(p.nu), mp.mpf(p.reps), method)
        return _report(float(s), float(v), p, ctx.dps)


def snr_open_simplified(n_atoms, cross_phase: float, reps: float) -> float:
    """Leading-order optimum √M·λN, valid for λN ≪ 1."""
    level = abs(cross_phase) * float(n_atoms)
    if level > SIMPLIFIED_WARN_LEVEL:
        warnings.warn(f"λN = {level:.3g} is not small; the simplified SNR is unreliable", stacklevel=2)
    return math.sqrt(reps) * abs(cross_phase) * float(n_atoms)


# --- both-closed scheme ------------------------------------------------------


def _signal_closed_mp(N, g, lam, mu, nu):
    return N**2 / 8 * (
        mp.cos(mu + nu) * _cpow(lam + g, 2 * (N - 1))
        + mp.cos(mu - nu) * _cpow(lam - g, 2 * (N - 1))
        - 2 * mp.cos(mu) * mp.cos(nu) * _cpow(g, 2 * (N - 1)) * _cpow(lam, 2 * N)
    )


def signal_closed(p: ClosedSchemeParams) -> float:
    if p.cross_phase == 0:
        return 0.0
    with _Ctx(p.n_atoms, p.self_phase, p.cross_phase) as c:
        return float(
            _signal_closed_mp(c.N, mp.mpf(p.self_phase), mp.mpf(p.cross_phase), mp.mpf(p.mu), mp.mpf(p.nu))
        )


def _mean_closed(N, g, lam, a):
    return N / 2 * mp.cos(a) * _cpow(g, N - 1) * _cpow(lam, N)


def _second_closed(N, g, lam, a):
    if N == 1:
        return N / 8 * (1 + N)
    return N / 8 * (1 + N + (N - 1) * mp.cos(2 * a) * _cpow(2 * g, N - 2) * _cpow(2 * lam, N))


def _second_first_closed(N, g, lam, a, b):
    # ⟨X_a² Y_b⟩ with the squared operator at phase a
    head = 2 * mp.cos(b) * _cpow(g, N - 1) * _cpow(lam, N - 2) * (N + mp.cos(2 * lam))
    tail = 0
    if N > 1:
        tail = (N - 1) * (
            mp.cos(2 * a + b) * _cpow(2 * g + lam, N - 2) * _cpow(g + 2 * lam, N - 1)
            + mp.cos(2 * a - b) * _cpow(2 * g - lam, N - 2) * _cpow(g - 2 * lam, N - 1)
        )
    return N**2 / 32 * (head + tail)


def _second_second_closed(N, g, lam, a, b):
    body = 2 * (N + 1) ** 2
    if N > 1:
        body += (N - 1) * (
            2 * (mp.cos(2 * a) + mp.cos(2 * b)) * _cpow(2 * g, N - 2) * _cpow(2 * lam, N - 2) * (N + mp.cos(4 * lam))
            + (N - 1) * mp.cos(2 * (a + b)) * _cpow(2 * (g + lam), 2 * (N - 2))
            + (N - 1) * mp.cos(2 * (a - b)) * _cpow(2 * (g - lam), 2 * (N - 2))
        )
    return N**2 / 128 * body


def _moments_closed_mp(N, g, lam, mu, nu):
    x = _mean_closed(N, g, lam, mu)
    y = _mean_closed(N, g, lam, nu)
    s = _signal_closed_mp(N, g, lam, mu, nu)
    return {
        (1, 0): x,
        (0, 1): y,
        (1, 1): s + x * y,
        (2, 0): _second_closed(N, g, lam, mu),
        (0, 2): _second_closed(N, g, lam, nu),
        (2, 1): _second_first_closed(N, g, lam, mu, nu),
        (1, 2): _second_first_closed(N, g, lam, nu, mu),
        (2, 2): _second_second_closed(N, g, lam, mu, nu),
    }


def moments_closed(p: ClosedSchemeParams) -> dict:
    """Raw moments ``{(i, j): ⟨X^i Y^j⟩}`` with X = J_ϕ^ab and Y = J_ϕ′^cd."""
    with _Ctx(p.n_atoms, p.self_phase, p.cross_phase) as c:
        m = _moments_closed_mp(c.N, mp.mpf(p.self_phase), mp.mpf(p.cross_phase), mp.mpf(p.mu), mp.mpf(p.nu))
        return {k: float(v) for k, v in m.items()}


def _variance_closed_mp(N, g, lam, mu, nu, reps, combination):
    m = _moments_closed_mp(N, g, lam, mu, nu)
    v = _central22(m) - _covariance(m) ** 2
    if combination == "literal":
        # the literal closed-form combination carries an extra +⟨XY⟩² term
        v = v + m[(1, 1)] ** 2
    elif combination != "cumulant":
        raise ValueError(f"unknown combination {combination!r} (use 'cumulant' or 'literal')")
    return v / reps


def variance_closed(p: ClosedSchemeParams, combination: str = "cumulant") -> float:
    with _Ctx(p.n_atoms, p.self_phase, p.cross_phase) as c:
        return float(
            _variance_closed_mp(
                c.N, mp.mpf(p.self_phase), mp.mpf(p.cross_phase), mp.mpf(p.mu), mp.mpf(p.nu), mp.mpf(p.reps), combination
            )
        )


def snr_closed(p: ClosedSchemeParams, combination: str = "cumulant") -> SnrReport:
    ctx = _Ctx(p.n_atoms, p.self_phase, p.cross_phase)
    with ctx as c:
        args = (c.N, mp.mpf(p.self_phase), mp.mpf(p.cross_phase), mp.mpf(p.mu), mp.mpf(p.nu))
        # without cross coupling the bracket cancels identically; skip the rounding residue
        s = _signal_closed_mp(*args) if p.cross_phase else mp.mpf(0)
        v = _variance_closed_mp(*args, mp.mpf(p.reps), combination)
        return _report(float(s), float(v), p, ctx.dps)


# --- purity and isolated interferometer -------------------------------------


def _log_cos_vec(x: np.ndarray) -> np.ndarray:
    x = np.abs(np.remainder(x + np.pi / 2, np.pi) - np.pi / 2)
    small = x < 1e-4
    x2 = x * x
    out = np.empty_like(x)
    out[small] = -x2[small] / 2 - x2[small] ** 2 / 12 - x2[small] ** 3 / 45
    s = np.sin(x[~small] / 2)
    with np.errstate(divide="ignore"):
        out[~small] = np.log1p(-2 * s * s)
    return out


def purity_analytic(n_atoms, cross_phase: float) -> tuple[float, float]:
    """Purity Tr(ρ_ab²) and Rényi-2 entropy −½ ln(purity) after the interaction.

    Uses the exact binomial sum up to 1e6 atoms, the asymptotic 1 − ½λ²N²
    beyond that (only where λ²N² < 0.1).
    """
    n = _atom_count(n_atoms)
    if cross_phase == 0:
        return 1.0, 0.0
    if n > PURITY_SUM_MAX_ATOMS:
        level = (cross_phase * n) ** 2
        if level >= PURITY_ASYMPTOTIC_GUARD:
            raise ValueError(
                f"purity asymptotic needs λ²N² < {PURITY_ASYMPTOTIC_GUARD}, got {level:.3g} at N={n}"
            )
        deficit = 0.5 * level
    else:
        j = np.arange(2 * n + 1)
        log_w = gammaln(2 * n + 1) - gammaln(j + 1) - gammaln(2 * n - j + 1) - 2 * n * math.log(2)
        log_term = 2 * n * _log_cos_vec(cross_phase * (n - j))
        # 1 − μ = −Σ w_j expm1(log term), accurate when μ is close to 1
        deficit = float(-np.sum(np.exp(log_w) * np.expm1(log_term)))
    purity = 1.0 - deficit
    return purity, -0.5 * math.log1p(-deficit)


def snr_single(n_atoms, self_phase: float, delta: float, reps: float = 1) -> float:
    """√M·|⟨J_z⟩|/√Var(J_z) for one isolated, closed interferometer."""
    n = _atom_count(n_atoms)
    if not reps >= 1:
        raise ValueError(f"repetitions must be >= 1, got {reps!r}")
    with mp.workdps(working_dps(n, self_phase, delta)):
        N, g, d = mp.mpf(n), mp.mpf(self_phase), mp.mpf(delta)
        num = mp.sqrt(2 * N) * mp.cos(d) * _cpow(g, N - 1)
        den = (1 + N) - 2 * N * mp.cos(d) ** 2 * _cpow(g, 2 * (N - 1))
        if n > 1:
            den += (N - 1) * mp.cos(2 * d) * _cpow(2 * g, N - 2)
        if num == 0:
            return 0.0
        if den <= 0:
            raise DegenerateVarianceError(
                f"single-interferometer noise vanishes (denominator {mp.nstr(den, 5)}) at γ={self_phase}, δ={delta}"
            )
        return float(abs(num) / mp.sqrt(den) * mp.sqrt(reps))
