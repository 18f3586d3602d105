"""Exact small-N simulation of two coupled two-mode interferometers.

Each interferometer holds ``N`` bosons in two modes. Within the fixed-N
subspace the basis vector ``k`` is |N-k>_alpha |k>_beta, so a single
interferometer is a length N+1 vector and the joint state of ``ab`` and
``cd`` is an (N+1) x (N+1) amplitude matrix ``C[k, k']``.

Operator conventions (all verified in the test suite):

* ``J_z = (N_alpha - N_beta) / 2`` is diagonal with entries (N - 2k)/2.
* ``J_phi = (alpha beta^dag e^{i phi} + alpha^dag beta e^{-i phi}) / 2``;
  ``phi = 0`` is J_x and ``phi = pi/2`` is J_y.
* ``U(theta, phi) = exp[theta (e^{i phi} alpha beta^dag - e^{-i phi} alpha^dag beta)]``
  as a matrix ``U[i, j] = <i|U|j>``. ``U(pi/4, phi)|N,0>`` is the coherent
  split state and ``U(-pi/4, phi)^dag J_z U(-pi/4, phi) = J_phi``, so closing an
  interferometer uses ``theta = -pi/4``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm
from scipy.special import comb

MAX_ATOMS = 64
NORM_TOL = 1e-12
IMAG_TOL = 1e-10
CLOSE_THETA = -np.pi / 4


class Side(enum.Enum):
    AB = "ab"
    CD = "cd"


def _check_atoms(n: int) -> int:
    if int(n) != n or n < 0:
        raise ValueError(f"atom count must be a non-negative integer, got {n!r}")
    n = int(n)
    if n > MAX_ATOMS:
        raise ValueError(f"oracle holds at most {MAX_ATOMS} atoms per interferometer, got {n}")
    return n


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class InterferometerState:
    """Pure state of one interferometer; ``amplitudes[k]`` multiplies |N-k>|k>."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amplitudes)
        if amps.ndim != 1 or amps.size == 0:
            raise ValueError("amplitudes must be a non-empty vector")
        _check_atoms(amps.size - 1)
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state not normalized: |psi|^2 = {norm!r}")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def atom_count(self) -> int:
        return self.amplitudes.size - 1


@dataclass(frozen=True)
class JointState:
    """Pure joint state; ``amplitudes[k, k']`` multiplies |N-k>_a|k>_b|N-k'>_c|k'>_d."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amplitudes)
        if amps.ndim != 2:
            raise ValueError("joint amplitudes must be a matrix")
        if amps.shape[0] != amps.shape[1]:
            raise ValueError(
                "unequal atom numbers are not supported: "
                f"shape {amps.shape} implies N_ab={amps.shape[0]-1}, N_cd={amps.shape[1]-1}"
            )
        _check_atoms(amps.shape[0] - 1)
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state not normalized: |psi|^2 = {norm!r}")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def atom_count(self) -> int:
        return self.amplitudes.shape[0] - 1

    @classmethod
    def product(cls, ab: InterferometerState, cd: InterferometerState) -> "JointState":
        if ab.atom_count != cd.atom_count:
            raise ValueError(
                f"unequal atom numbers are not supported (N_ab={ab.atom_count}, N_cd={cd.atom_count})"
            )
        return cls(np.outer(ab.amplitudes, cd.amplitudes))

    def schmidt_rank(self, tol: float = 1e-10) -> int:
        return int(np.sum(np.linalg.svd(self.amplitudes, compute_uv=False) > tol))


@dataclass(frozen=True)
class SpinOp:
    """Collective spin component on one side: ``phase=None`` is J_z, otherwise J_phi."""

    side: Side
    phase: float | None = None

    @classmethod
    def z(cls, side: Side) -> "SpinOp":
        return cls(side, None)

    @classmethod
    def phi(cls, side: Side, phase: float) -> "SpinOp":
        return cls(side, float(phase))

    def matrix(self, n: int) -> np.ndarray:
        if self.phase is None:
            return jz_matrix(n)
        return jphi_matrix(n, self.phase)


@dataclass(frozen=True)
class PhaseConfig:
    """Beam-splitter phases in radians.

    ``phi``/``phi_prime`` are the opening phases of ab/cd, ``varphi``/``varphi_prime``
    the closing phases.
    """

    phi: float = 0.0
    phi_prime: float = 0.0
    varphi: float = 0.0
    varphi_prime: float = 0.0

    @property
    def delta_open(self) -> float:
        """Signal phase φ − ϕ of the one-open scheme."""
        return self.phi - self.varphi

    @property
    def mu(self) -> float:
        return self.varphi - self.phi

    @property
    def nu(self) -> float:
        return self.varphi_prime - self.phi_prime

    @property
    def delta_single(self) -> float:
        """Phase difference between the two beam splitters of an isolated interferometer."""
        return self.varphi - self.phi


# --- operators ---------------------------------------------------------------


def _raising(n: int) -> np.ndarray:
    # matrix of alpha beta^dag: |N-k, k> -> sqrt((N-k)(k+1)) |N-k-1, k+1>
    k = np.arange(n)
    out = np.zeros((n + 1, n + 1))
    out[k + 1, k] = np.sqrt((n - k) * (k + 1.0))
    return out


def jz_matrix(n: int) -> np.ndarray:
    n = _check_atoms(n)
    return np.diag((n - 2.0 * np.arange(n + 1)) / 2)


def jphi_matrix(n: int, phase: float) -> np.ndarray:
    n = _check_atoms(n)
    r = _raising(n)
    return (r * np.exp(1j * phase) + r.T * np.exp(-1j * phase)) / 2


def beam_splitter_matrix(n: int, theta: float, phase: float) -> np.ndarray:
    """Unitary ``<i|U(theta, phase)|j>`` on the fixed-N subspace."""
    n = _check_atoms(n)
    r = _raising(n)
    generator = np.exp(1j * phase) * r - np.exp(-1j * phase) * r.T
    return expm(theta * generator)


@lru_cache(maxsize=None)
def _binomial_weights(n: int) -> np.ndarray:
    k = np.arange(n + 1)
    w = comb(n, k, exact=False) / 2.0**n
    return w / w.sum()


# --- states ------------------------------------------------------------------


def coherent_split_state(n: int, phase: float) -> InterferometerState:
    """Binomial 50-50 split with relative phase ``phase``."""
    n = _check_atoms(n)
    k = np.arange(n + 1)
    return InterferometerState(np.sqrt(_binomial_weights(n)) * np.exp(1j * k * phase))


def fock_state(n: int, k: int) -> InterferometerState:
    n = _check_atoms(n)
    amps = np.zeros(n + 1, complex)
    amps[k] = 1.0
    return InterferometerState(amps)


def evolve_interaction(
    state: JointState, self_phase: float, cross_phase: float, phase: float = 0.0, phase_prime: float = 0.0
) -> JointState:
    """Apply the diagonal two-body evolution.

    Multiplies ``C[k, k']`` by exp(i(k Φ + k' Φ')) exp(iγ(k² + k'²)) exp(2iλ k k').
    """
    n = state.atom_count
    k = np.arange(n + 1)
    kk, kp = np.meshgrid(k, k, indexing="ij")
    factor = np.exp(
        1j * (kk * phase + kp * phase_prime)
        + 1j * self_phase * (kk**2 + kp**2)
        + 2j * cross_phase * kk * kp
    )
    return JointState(state.amplitudes * factor)


def interacted_state(
    n: int, self_phase: float, cross_phase: float, phi: float = 0.0, phi_prime: float = 0.0
) -> JointState:
    """Coherent product state after the interaction, with the linear phase -N(γ+λ) absorbed."""
    start = JointState.product(coherent_split_state(n, phi), coherent_split_state(n, phi_prime))
    shift = -n * (self_phase + cross_phase)
    return evolve_interaction(start, self_phase, cross_phase, shift, shift)


def close_interferometer(state: JointState, side: Side, theta: float = CLOSE_THETA, phase: float = 0.0) -> JointState:
    u = beam_splitter_matrix(state.atom_count, theta, phase)
    c = state.amplitudes
    if side is Side.AB:
        out = u @ c
    else:
        out = c @ u.T
    return JointState(out / np.sqrt(np.vdot(out, out).real))


# --- expectations ------------------------------------------------------------


def _real(value: complex, what: str) -> float:
    if abs(value.imag) > IMAG_TOL * max(1.0, abs(value.real)):
        raise ArithmeticError(f"{what} has imaginary residue {value.imag!r}; operator is not Hermitian")
    return float(value.real)


def _expect(c: np.ndarray, a: np.ndarray, b: np.ndarray) -> complex:
    # <psi| A ⊗ B |psi> with C -> A C B^T
    return complex(np.vdot(c, a @ c @ b.T))


def joint_moment(state: JointState, op_a: SpinOp, power_a: int, op_b: SpinOp, power_b: int) -> float:
    """Exact ⟨(op_a)^power_a (op_b)^power_b⟩ with op_a on ab and op_b on cd."""
    if op_a.side is not Side.AB or op_b.side is not Side.CD:
        raise ValueError("joint_moment needs op_a on side AB and op_b on side CD")
    if power_a not in (0, 1, 2) or power_b not in (0, 1, 2):
        raise ValueError("powers must be 0, 1 or 2")
    n = state.atom_count
    a = np.linalg.matrix_power(op_a.matrix(n), power_a)
    b = np.linalg.matrix_power(op_b.matrix(n), power_b)
    return _real(_expect(state.amplitudes, a, b), "joint moment")


@dataclass(frozen=True)
class MomentTable:
    """Raw joint moments ``m[p][q] = ⟨X^p Y^q⟩`` for p, q in {0, 1, 2}."""

    m: tuple

    def __getitem__(self, pq):
        p, q = pq
        return self.m[p][q]

    @property
    def covariance(self) -> float:
        return self[1, 1] - self[1, 0] * self[0, 1]

    @property
    def kappa20(self) -> float:
        return self[2, 0] - self[1, 0] ** 2

    @property
    def kappa02(self) -> float:
        return self[0, 2] - self[0, 1] ** 2

    @property
    def kappa22(self) -> float:
        x, y, xy = self[1, 0], self[0, 1], self[1, 1]
        return (
            self[2, 2]
            - 2 * self[2, 1] * y
            - 2 * self[1, 2] * x
            - self[2, 0] * self[0, 2]
            + 2 * self[2, 0] * y**2
            + 2 * x**2 * self[0, 2]
            + 8 * xy * x * y
            - 6 * x**2 * y**2
            - 2 * xy**2
        )


def moment_table(state: JointState, op_a: SpinOp, op_b: SpinOp) -> MomentTable:
    n = state.atom_count
    xa = op_a.matrix(n)
    yb = op_b.matrix(n)
    pa = [np.eye(n + 1), xa, xa @ xa]
    pb = [np.eye(n + 1), yb, yb @ yb]
    c = state.amplitudes
    m = tuple(tuple(_real(_expect(c, pa[p], pb[q]), "joint moment") for q in range(3)) for p in range(3))
    return MomentTable(m)


def covariance(state: JointState, op_a: SpinOp, op_b: SpinOp) -> float:
    return moment_table(state, op_a, op_b).covariance


def covariance_S(state: JointState, varphi: float) -> float:
    """⟨J_ϕ^ab J_z^cd⟩ − ⟨J_ϕ^ab⟩⟨J_z^cd⟩, i.e. the covariance after closing ab."""
    return covariance(state, SpinOp.phi(Side.AB, varphi), SpinOp.z(Side.CD))


def estimator_variance(state: JointState, op_a: SpinOp, op_b: SpinOp, reps: int) -> float:
    """Large-M variance (κ22 + κ20 κ02 + S²)/M of the sample covariance."""
    if int(reps) != reps or reps < 2:
        raise ValueError(f"repetitions must be an integer >= 2, got {reps!r}")
    t = moment_table(state, op_a, op_b)
    return (t.kappa22 + t.kappa20 * t.kappa02 + t.covariance**2) / reps


def estimator_variance_S(state: JointState, varphi: float, reps: int) -> float:
    return estimator_variance(state, SpinOp.phi(Side.AB, varphi), SpinOp.z(Side.CD), reps)


def reduced_density_ab(state: JointState) -> np.ndarray:
    c = state.amplitudes
    return c @ c.conj().T


def purity_ab(state: JointState) -> float:
    """Tr(ρ_ab²) after tracing out cd."""
    rho = reduced_density_ab(state)
    return float(np.real(np.vdot(rho, rho)))


def mixture_covariance(ensemble: Sequence[tuple[float, JointState]], varphi: float) -> float:
    """Covariance S of the mixed state Σ_i p_i |ψ_i⟩⟨ψ_i|."""
    weights = np.array([w for w, _ in ensemble], dtype=float)
    if weights.size == 0:
        raise ValueError("empty ensemble")
    if np.any(weights < 0):
        raise ValueError("mixture weights must be non-negative")
    if abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError(f"mixture weights sum to {weights.sum()!r}, not 1")
    op_a = SpinOp.phi(Side.AB, varphi)
    op_b = SpinOp.z(Side.CD)
    x = y = xy = 0.0
    for w, st in ensemble:
        t = moment_table(st, op_a, op_b)
        x += w * t[1, 0]
        y += w * t[0, 1]
        xy += w * t[1, 1]
    return xy - x * y


def number_diagonal_ensemble(probabilities: np.ndarray) -> list[tuple[float, JointState]]:
    """Mixture Σ p[k,k'] |k⟩⟨k| ⊗ |k'⟩⟨k'| written as weighted pure product states."""
    p = np.asarray(probabilities, dtype=float)
    n = p.shape[0] - 1
    out = []
    for k, kp in zip(*np.nonzero(p)):
        out.append((float(p[k, kp]), JointState.product(fock_state(n, k), fock_state(n, kp))))
    return out


# --- isolated interferometer -------------------------------------------------


def single_interferometer_state(n: int, self_phase: float, phi: float = 0.0) -> InterferometerState:
    k = np.arange(n + 1)
    amps = coherent_split_state(n, phi).amplitudes * np.exp(1j * self_phase * (k**2 - n * k))
    return InterferometerState(amps)


def single_snr(n: int, self_phase: float, delta: float, reps: float = 1) -> float:
    """|⟨J_z⟩| / sqrt(Var J_z) · sqrt(M) for one isolated, closed interferometer."""
    st = single_interferometer_state(n, self_phase)
    j = jphi_matrix(n, delta)
    a = st.amplitudes
    mean = _real(np.vdot(a, j @ a), "mean")
    var = _real(np.vdot(a, j @ j @ a), "second moment") - mean**2
    if var <= 0:
        raise ArithmeticError("degenerate single-interferometer variance")
    return float(abs(mean) / np.sqrt(var) * np.sqrt(reps))


def random_joint_state(n: int, rng: np.random.Generator) -> JointState:
    c = rng.normal(size=(n + 1, n + 1)) + 1j * rng.normal(size=(n + 1, n + 1))
    return JointState(c / np.linalg.norm(c))


def random_interferometer_state(n: int, rng: np.random.Generator) -> InterferometerState:
    c = rng.normal(size=n + 1) + 1j * rng.normal(size=n + 1)
    return InterferometerState(c / np.linalg.norm(c))


def local_unitary(state: JointState, u_ab: np.ndarray | None = None, u_cd: np.ndarray | None = None) -> JointState:
    c = state.amplitudes
    if u_ab is not None:
        c = u_ab @ c
    if u_cd is not None:
        c = c @ u_cd.T
    return JointState(c / np.sqrt(np.vdot(c, c).real))


def ensemble_weights_ok(weights: Iterable[float]) -> bool:
    w = np.asarray(list(weights), float)
    return bool(np.all(w >= 0) and abs(w.sum() - 1.0) <= 1e-12)
