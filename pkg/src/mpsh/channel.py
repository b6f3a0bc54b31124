"""Quantum channels as superoperators.

A :class:`SuperOperator` stores a linear map on D×D matrices as a D²×D² matrix
acting on column-stacked vectorizations, ``vec(M)[r + D*c] = M[r, c]``. With
this convention ``vec(A M B) = (Bᵀ ⊗ A) vec(M)``.

Kraus families carry an explicit convention flag:

* ``"schrodinger"``: M ↦ Σ Aᵢ M Aᵢ†
* ``"heisenberg"``:  M ↦ Σ Aᵢ† M Aᵢ  (the MPS transfer map)

The flag is never converted silently; :func:`from_kraus` honours it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np
import scipy.linalg
import scipy.optimize
from numpy.typing import ArrayLike, NDArray

from mpsh import linalg
from mpsh.errors import DimensionError, NoCertificateError, NotErgodicError, NumericalError
from mpsh.linalg import CMatrix

Convention = Literal["schrodinger", "heisenberg"]
CONVENTIONS = ("schrodinger", "heisenberg")

# eigenvalue-1 multiplicity is counted within this distance of the unit circle
SPECTRAL_TOL = 1e-9


def vec(m: ArrayLike) -> NDArray[np.complex128]:
    return np.asarray(m, dtype=np.complex128).reshape(-1, order="F")


def unvec(v: ArrayLike, dim: int) -> CMatrix:
    return np.asarray(v, dtype=np.complex128).reshape(dim, dim, order="F")


@dataclass(frozen=True)
class KrausFamily:
    """Ordered list of D×D matrices with a direction convention."""

    operators: tuple[CMatrix, ...]
    convention: Convention = "schrodinger"

    def __init__(self, operators: Iterable[ArrayLike], convention: Convention = "schrodinger"):
        ops = tuple(linalg.as_square(a) for a in operators)
        if not ops:
            raise ValueError("a Kraus family needs at least one operator")
        dim = ops[0].shape[0]
        if any(a.shape != (dim, dim) for a in ops):
            raise DimensionError("all Kraus operators must share the same dimension")
        if convention not in CONVENTIONS:
            raise ValueError(f"convention must be one of {CONVENTIONS}, got {convention!r}")
        for a in ops:
            a.setflags(write=False)
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "convention", convention)

    @property
    def dim(self) -> int:
        return self.operators[0].shape[0]

    def __len__(self) -> int:
        return len(self.operators)

    def __getitem__(self, i: int) -> CMatrix:
        return self.operators[i]

    def sum_adag_a(self) -> CMatrix:
        """Σ Aᵢ†Aᵢ."""
        return sum(a.conj().T @ a for a in self.operators)

    def sum_a_adag(self) -> CMatrix:
        """Σ AᵢAᵢ† (the MPS gauge sum)."""
        return sum(a @ a.conj().T for a in self.operators)

    def with_convention(self, convention: Convention) -> KrausFamily:
        """Same matrices, different flag. The realized map changes."""
        return KrausFamily(self.operators, convention)

    def apply(self, m: ArrayLike) -> CMatrix:
        """Direct Kraus-sum evaluation (independent of the superoperator matrix)."""
        m = linalg.as_square(m)
        if self.convention == "schrodinger":
            return sum(a @ m @ a.conj().T for a in self.operators)
        return sum(a.conj().T @ m @ a for a in self.operators)


@dataclass(frozen=True, eq=False)
class SuperOperator:
    """Linear map on D×D matrices in the column-stacking representation."""

    matrix: CMatrix

    def __post_init__(self):
        m = linalg.as_square(self.matrix)
        dim = math.isqrt(m.shape[0])
        if dim * dim != m.shape[0]:
            raise DimensionError(f"superoperator side {m.shape[0]} is not a perfect square")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return math.isqrt(self.matrix.shape[0])

    @classmethod
    def identity(cls, dim: int) -> SuperOperator:
        return cls(np.eye(dim * dim, dtype=np.complex128))

    @classmethod
    def sandwich(cls, left: ArrayLike, right: ArrayLike) -> SuperOperator:
        """M ↦ left · M · right."""
        return cls(np.kron(np.asarray(right).T, np.asarray(left)))

    @classmethod
    def from_function(cls, fn, dim: int) -> SuperOperator:
        """Tabulate a linear map by evaluating it on the matrix units."""
        cols = []
        for c in range(dim):
            for r in range(dim):
                cols.append(vec(fn(linalg.matrix_unit(dim, r, c))))
        return cls(np.stack(cols, axis=1))

    def __call__(self, m: ArrayLike) -> CMatrix:
        return apply(self, m)

    def __matmul__(self, other: SuperOperator) -> SuperOperator:
        return compose(self, other)

    def power(self, n: int) -> SuperOperator:
        return SuperOperator(np.linalg.matrix_power(self.matrix, n))

    def choi(self) -> CMatrix:
        """Σ_{kl} E_kl ⊗ Φ(E_kl)."""
        d = self.dim
        # Φ(E_kl) is column (k + d*l) of the matrix
        blocks = self.matrix.reshape(d, d, d, d, order="F")  # [r, c, k, l]
        return np.einsum("rckl->krlc", blocks).reshape(d * d, d * d)

    def allclose(self, other: SuperOperator, atol: float = 1e-10) -> bool:
        return self.dim == other.dim and bool(np.allclose(self.matrix, other.matrix, rtol=0, atol=atol))


def from_kraus(k: KrausFamily) -> SuperOperator:
    """Superoperator realizing the family per its convention."""
    if k.convention == "schrodinger":
        # A M A† -> conj(A) ⊗ A
        mat = sum(np.kron(a.conj(), a) for a in k.operators)
    else:
        # A† M A -> Aᵀ ⊗ A†
        mat = sum(np.kron(a.T, a.conj().T) for a in k.operators)
    return SuperOperator(mat)


def apply(phi: SuperOperator, m: ArrayLike) -> CMatrix:
    m = linalg.as_square(m)
    if m.shape[0] != phi.dim:
        raise DimensionError(f"matrix of size {m.shape[0]} given to a superoperator on {phi.dim}x{phi.dim}")
    return unvec(phi.matrix @ vec(m), phi.dim)


def compose(outer: SuperOperator, inner: SuperOperator) -> SuperOperator:
    """outer ∘ inner."""
    if outer.dim != inner.dim:
        raise DimensionError(f"cannot compose superoperators on dims {outer.dim} and {inner.dim}")
    return SuperOperator(outer.matrix @ inner.matrix)


def compose_all(ops: Sequence[SuperOperator], dim: int | None = None) -> SuperOperator:
    """ops[0] ∘ ops[1] ∘ ... ∘ ops[-1]; the last entry acts first."""
    if not ops:
        if dim is None:
            raise ValueError("empty composition needs an explicit dim")
        return SuperOperator.identity(dim)
    mat = ops[0].matrix
    for op in ops[1:]:
        mat = mat @ op.matrix
    return SuperOperator(mat)


def superop_trace(phi: SuperOperator) -> complex:
    """Σ_{k,l} ⟨e_k| Φ(|e_k⟩⟨e_l|) |e_l⟩, cross-checked against the matrix trace."""
    d = phi.dim
    blocks = phi.matrix.reshape(d, d, d, d, order="F")  # [r, c, k, l] = Φ(E_kl)[r, c]
    by_units = complex(np.einsum("klkl->", blocks))
    by_matrix = complex(np.trace(phi.matrix))
    if abs(by_units - by_matrix) > 1e-9 * max(1.0, abs(by_matrix)):  # pragma: no cover - sanity net
        raise NumericalError(f"superoperator trace paths disagree: {by_units} vs {by_matrix}")
    return by_units


@dataclass(frozen=True)
class ChannelCheck:
    """Outcome of a CP/TP/unital verification; never raised, only reported."""

    name: str
    passed: bool
    violation: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"check": self.name, "passed": self.passed, "violation": self.violation, **self.details}


def _tp_sum(k: KrausFamily) -> CMatrix:
    # sum whose equality with I means the realized map preserves the trace
    return k.sum_adag_a() if k.convention == "schrodinger" else k.sum_a_adag()


def _unital_sum(k: KrausFamily) -> CMatrix:
    return k.sum_a_adag() if k.convention == "schrodinger" else k.sum_adag_a()


def is_cptp(k: KrausFamily, tol: float | None = None) -> ChannelCheck:
    """CP via Choi-matrix PSD-ness, TP via the completeness sum."""
    tol = linalg.get_tol() if tol is None else tol
    choi = from_kraus(k).choi()
    cp_violation = max(0.0, -float(scipy.linalg.eigvalsh(linalg.hermitian_part(choi))[0]))
    cp_violation = max(cp_violation, linalg.max_abs(choi - choi.conj().T))
    tp_violation = linalg.max_abs(_tp_sum(k) - np.eye(k.dim))
    return ChannelCheck(
        "cptp",
        passed=cp_violation <= tol and tp_violation <= tol,
        violation=max(cp_violation, tp_violation),
        details={"cp_violation": cp_violation, "tp_violation": tp_violation, "convention": k.convention},
    )


def is_unital(k: KrausFamily, tol: float | None = None) -> ChannelCheck:
    tol = linalg.get_tol() if tol is None else tol
    violation = linalg.max_abs(_unital_sum(k) - np.eye(k.dim))
    return ChannelCheck("unital", passed=violation <= tol, violation=violation, details={"convention": k.convention})


def choi_is_psd(phi: SuperOperator, tol: float | None = None) -> bool:
    return linalg.is_psd(phi.choi(), tol)


def is_density_matrix(rho: ArrayLike, tol: float | None = None) -> bool:
    tol = linalg.get_tol() if tol is None else tol
    m = linalg.as_square(rho)
    return linalg.is_psd(m, tol) and abs(np.trace(m) - 1.0) <= tol


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues: NDArray[np.complex128]
    spectral_gap: float
    ergodic: bool
    mixing: bool
    fixed_point: CMatrix | None = None

    def to_dict(self) -> dict:
        return {
            "eigenvalues": self.eigenvalues,
            "spectral_gap": self.spectral_gap,
            "ergodic": self.ergodic,
            "mixing": self.mixing,
            "fixed_point": self.fixed_point,
        }


def _fixed_point_from(phi: SuperOperator, w: NDArray, v: NDArray) -> CMatrix:
    dist = np.abs(w - 1.0)
    near = np.flatnonzero(dist <= 1e-6)
    if near.size == 0:
        raise NumericalError(f"no eigenvalue within 1e-6 of 1 (closest: {w[np.argmin(dist)]})")
    if np.count_nonzero(dist <= SPECTRAL_TOL) > 1 or near.size > 1:
        raise NotErgodicError("eigenvalue 1 is degenerate: fixed space is not one-dimensional")
    rho = unvec(v[:, near[0]], phi.dim)
    tr = np.trace(rho)
    if abs(tr) < 1e-12:
        raise NumericalError("fixed eigenvector is traceless; map is not trace preserving")
    rho = rho / tr
    rho = linalg.hermitian_part(rho)
    return rho / np.trace(rho).real


def fixed_point(phi: SuperOperator) -> CMatrix:
    """Unique invariant density matrix of a trace-preserving map.

    Raises:
        NotErgodicError: eigenvalue 1 is degenerate.
        NumericalError: no eigenvalue close enough to 1.
    """
    w, v = linalg.eig_general(phi.matrix)
    return _fixed_point_from(phi, w, v)


def spectral_classification(phi: SuperOperator, tol: float = SPECTRAL_TOL) -> SpectralReport:
    """Full spectrum plus ergodic/mixing verdicts for a trace-preserving map."""
    w, v = linalg.eig_general(phi.matrix)
    moduli = np.abs(w)
    n_one = int(np.count_nonzero(np.abs(w - 1.0) <= tol))
    n_unit = int(np.count_nonzero(moduli >= 1.0 - tol))
    ergodic = n_one == 1
    mixing = ergodic and n_unit == 1
    gap = 1.0 - float(moduli[1]) if len(w) > 1 else 1.0
    rho = None
    if ergodic:
        try:
            rho = _fixed_point_from(phi, w, v)
        except NotErgodicError:
            ergodic = mixing = False
    return SpectralReport(eigenvalues=w, spectral_gap=gap, ergodic=ergodic, mixing=mixing, fixed_point=rho)


def limit_channel(phi: SuperOperator) -> SuperOperator:
    """M ↦ Tr(M)·ρ*, the limit of Φⁿ for a mixing channel."""
    report = spectral_classification(phi)
    if not report.mixing:
        raise NotErgodicError("channel is not mixing; Φⁿ has no rank-one limit", report)
    return trace_replacement(report.fixed_point)


def trace_replacement(rho: ArrayLike) -> SuperOperator:
    """M ↦ Tr(M)·ρ."""
    rho = linalg.as_square(rho)
    return SuperOperator(np.outer(vec(rho), vec(np.eye(rho.shape[0]))))


@dataclass(frozen=True)
class MDReport:
    """Markov-Dobrushin constant κ and the mixing rate it certifies."""

    kappa: CMatrix
    kappa_trace: float
    theta: float | None
    exactness: Literal["closed_form", "lower_bound"]

    @property
    def stationary(self) -> bool:
        """One-step stationarity: Tr κ >= 1."""
        return self.theta == math.inf

    @property
    def contraction(self) -> float:
        """Contraction factor 1 - Tr κ, floored at 0."""
        return max(0.0, 1.0 - self.kappa_trace)

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "kappa_trace": self.kappa_trace,
            "theta": self.theta,
            "exactness": self.exactness,
            "stationary": self.stationary,
        }


def _theta_or_none(kappa_trace: float) -> float | None:
    try:
        return mixing_rate(kappa_trace)
    except NoCertificateError:
        return None


def _make_report(kappa: CMatrix, exactness) -> MDReport:
    kt = float(np.trace(kappa).real)
    return MDReport(kappa=kappa, kappa_trace=kt, theta=_theta_or_none(kt), exactness=exactness)


def md_constant_depolarizing(p: float, dim: int = 2) -> MDReport:
    """Closed form κ = (2p/3)·I for the qubit Pauli depolarizing channel."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if dim != 2:
        raise ValueError("the depolarizing closed form is for qubits")
    # Φ(ξξ†) = (1 - 4p/3)ξξ† + (2p/3)I has spectrum {2p/3, 1 - 2p/3}; the two swap at p = 3/4
    c = min(2.0 * p / 3.0, 1.0 - 2.0 * p / 3.0)
    return _make_report(c * np.eye(2, dtype=np.complex128), "closed_form")


def _sphere_points(dim: int, grid: int) -> NDArray[np.complex128]:
    """Deterministic unit vectors in ℂ^dim.

    For dim = 2 a Fibonacci lattice on the Bloch sphere (global phase is irrelevant);
    otherwise a scrambled-free Halton sequence mapped through the Gaussian inverse CDF.
    """
    if dim == 1:
        return np.ones((1, 1), dtype=np.complex128)
    if dim == 2:
        k = np.arange(grid) + 0.5
        polar = np.arccos(1.0 - 2.0 * k / grid)
        azim = np.pi * (1.0 + 5.0**0.5) * k
        return np.stack([np.cos(polar / 2), np.exp(1j * azim) * np.sin(polar / 2)], axis=1)
    from scipy.stats import norm, qmc

    u = qmc.Halton(d=2 * dim, scramble=False).random(grid + 1)[1:]
    g = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    z = g[:, :dim] + 1j * g[:, dim:]
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def _min_eigs_on(phi: SuperOperator, xi: NDArray[np.complex128]) -> NDArray[np.float64]:
    d = phi.dim
    # vec(ξξ†)[r + d*c] = ξ_r conj(ξ_c)
    rank_one = np.einsum("nc,nr->ncr", xi.conj(), xi).reshape(len(xi), d * d)
    out = (rank_one @ phi.matrix.T).reshape(len(xi), d, d).transpose(0, 2, 1)
    out = 0.5 * (out + np.conj(out.transpose(0, 2, 1)))
    return np.linalg.eigvalsh(out)[:, 0]


def md_constant_sphere_search(
    phi: SuperOperator | KrausFamily, grid: int = 10_000, refinements: int = 8
) -> MDReport:
    """κ ≈ c·I with c the smallest λ_min(Φ(ξξ†)) found over unit vectors ξ.

    The grid is deterministic; the ``refinements`` best grid points are polished
    with a Nelder-Mead search over the real parametrization of ξ.
    """
    if isinstance(phi, KrausFamily):
        phi = from_kraus(phi)
    if grid <= 0:
        raise ValueError("sphere search needs a non-empty grid")
    d = phi.dim
    pts = _sphere_points(d, grid)
    vals = _min_eigs_on(phi, pts)
    best = float(vals.min())

    def objective(x: NDArray[np.float64]) -> float:
        z = x[:d] + 1j * x[d:]
        nz = np.linalg.norm(z)
        if nz < 1e-12:
            return 1e3
        return float(_min_eigs_on(phi, (z / nz)[None, :])[0])

    for idx in np.argsort(vals)[: max(0, refinements)]:
        x0 = np.concatenate([pts[idx].real, pts[idx].imag])
        res = scipy.optimize.minimize(objective, x0, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-13})
        best = min(best, float(res.fun))
    c = max(best, 0.0)
    return _make_report(c * np.eye(d, dtype=np.complex128), "lower_bound")


def md_constant(phi: SuperOperator | KrausFamily | None = None, method: str = "sphere_search", **kwargs) -> MDReport:
    """Dispatch to ``closed_form_depolarizing`` (needs ``p``) or ``sphere_search``."""
    if method == "closed_form_depolarizing":
        return md_constant_depolarizing(kwargs["p"])
    if method == "sphere_search":
        if phi is None:
            raise ValueError("sphere_search needs a channel")
        return md_constant_sphere_search(phi, **kwargs)
    raise ValueError(f"unknown method {method!r}")


def mixing_rate(report: MDReport | float) -> float:
    """θ = -ln(1 - Tr κ).

    Returns ``math.inf`` when Tr κ >= 1 (the channel is stationary after one step).

    Raises:
        NoCertificateError: Tr κ <= 0.
    """
    kt = report.kappa_trace if isinstance(report, MDReport) else float(report)
    if kt <= 0.0:
        raise NoCertificateError(f"Tr κ = {kt:.3g} gives no ergodicity certificate")
    if kt >= 1.0:
        return math.inf
    return -math.log1p(-kt)


@dataclass(frozen=True)
class ContractionCheck:
    passed: bool
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs


def check_contraction(
    phi: SuperOperator, rho: ArrayLike, sigma: ArrayLike, report: MDReport, tol: float | None = None
) -> ContractionCheck:
    """‖Φρ - Φσ‖_TV <= (1 - Tr κ)‖ρ - σ‖_TV, both sides returned."""
    tol = linalg.get_tol() if tol is None else tol
    lhs = linalg.tv_norm(apply(phi, rho) - apply(phi, sigma))
    rhs = (1.0 - report.kappa_trace) * linalg.tv_norm(np.asarray(rho) - np.asarray(sigma))
    return ContractionCheck(passed=lhs <= rhs + tol, lhs=lhs, rhs=rhs)


def convergence_trace(phi: SuperOperator, rho0: ArrayLike, rho_star: ArrayLike, theta: float, n_max: int):
    """Rows ``(n, ‖Φⁿ(ρ₀) - ρ*‖_TV, 2e^{-nθ})`` for n = 0..n_max.

    The difference is propagated as Φⁿ(ρ₀ - ρ*), which equals Φⁿ(ρ₀) - ρ* for a
    fixed point ρ* but keeps relative precision once the distance drops below
    machine epsilon. The rounding-level trace of ρ₀ - ρ* is removed along ρ* first:
    a trace-preserving map never contracts it, so it would otherwise sit at ~1e-16
    while the exact difference of two states is traceless.
    """
    rows = []
    star = linalg.as_square(rho_star)
    delta = linalg.as_square(rho0) - star
    delta = delta - linalg.trace(delta) / linalg.trace(star) * star
    for n in range(n_max + 1):
        bound = 2.0 * math.exp(-n * theta) if theta != math.inf else (2.0 if n == 0 else 0.0)
        rows.append((n, linalg.tv_norm(delta), bound))
        delta = apply(phi, delta)
    return rows
