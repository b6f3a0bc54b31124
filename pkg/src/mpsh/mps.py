"""Matrix product states in the Heisenberg picture.

A chain is a sequence of site families ``{A_i^[k]}`` (d matrices of size D×D). The
finite-volume amplitudes are ``Tr(A_{i_1}^[1] ⋯ A_{i_n}^[n])``; the transfer channel
of site k is ``Φ_k(M) = Σ_i A_i^[k]† M A_i^[k]``.

Conventions:

* sites are numbered from 1, physical indices from 0;
* in state vectors and observable matrices the first site is the slowest index;
* composed transfer maps act with the lowest site innermost, so
  ``N(n) = Tr(Φ_n ∘ ⋯ ∘ Φ_1)``.

Expectation values are computed two ways when the brute-force cap allows it: from
the explicit state vector, and as superoperator traces of transfer maps composed
with the lifted observable. The two routes must agree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from mpsh import channel, linalg
from mpsh.channel import KrausFamily, SuperOperator
from mpsh.errors import (
    CapExceededError,
    ConsistencyError,
    DegenerateChainError,
    DimensionError,
    NotErgodicError,
    NumericalError,
)
from mpsh.linalg import CMatrix

STATE_CAP = 2**16
OBSERVABLE_CAP = 2**16
AGREEMENT_TOL = 1e-10
DEGENERATE_NORM = 1e-14


@dataclass(frozen=True, eq=False)
class MPSChain:
    """Site tensors of an MPS.

    ``sites`` holds one family when ``translation_invariant`` is true, otherwise one
    family per site (site k is ``sites[k - 1]``).
    """

    sites: tuple[KrausFamily, ...]
    translation_invariant: bool

    def __init__(self, sites: KrausFamily | Iterable[KrausFamily], translation_invariant: bool | None = None):
        if isinstance(sites, KrausFamily):
            sites = (sites,)
            translation_invariant = True if translation_invariant is None else translation_invariant
        sites = tuple(
            s if s.convention == "heisenberg" else s.with_convention("heisenberg") for s in sites
        )
        if not sites:
            raise ValueError("a chain needs at least one site family")
        if translation_invariant is None:
            translation_invariant = len(sites) == 1
        if translation_invariant and len(sites) != 1:
            raise ValueError("a translation-invariant chain holds exactly one site family")
        d, dim = len(sites[0]), sites[0].dim
        for k, s in enumerate(sites, start=1):
            if len(s) != d or s.dim != dim:
                raise DimensionError(f"site {k} has {len(s)} matrices of size {s.dim}, expected {d} of size {dim}")
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "translation_invariant", bool(translation_invariant))

    @classmethod
    def uniform(cls, matrices: Iterable[ArrayLike]) -> MPSChain:
        return cls(KrausFamily(matrices, "heisenberg"), True)

    @classmethod
    def per_site(cls, families: Iterable[Iterable[ArrayLike]]) -> MPSChain:
        return cls([KrausFamily(f, "heisenberg") for f in families], False)

    @property
    def physical_dim(self) -> int:
        return len(self.sites[0])

    @property
    def bond_dim(self) -> int:
        return self.sites[0].dim

    @property
    def length(self) -> int | None:
        """Number of defined sites, ``None`` for translation-invariant chains."""
        return None if self.translation_invariant else len(self.sites)

    def family(self, k: int) -> KrausFamily:
        """Site family at site k (1-based)."""
        if k < 1:
            raise IndexError(f"sites are numbered from 1, got {k}")
        if self.translation_invariant:
            return self.sites[0]
        if k > len(self.sites):
            raise IndexError(f"site {k} is beyond the {len(self.sites)} defined sites")
        return self.sites[k - 1]

    def tensor(self, k: int) -> NDArray[np.complex128]:
        """Site k stacked as an array of shape (d, D, D)."""
        return np.stack(self.family(k).operators)

    def repeated(self, n_sites: int) -> MPSChain:
        """Explicit per-site copy of the first ``n_sites`` sites."""
        return MPSChain([self.family(k) for k in range(1, n_sites + 1)], False)


@dataclass(frozen=True, eq=False)
class LocalObservable:
    """Dense operator on the sites ``first..last`` (inclusive, 1-based)."""

    window: tuple[int, int]
    matrix: CMatrix
    label: str = ""

    def __init__(self, matrix: ArrayLike, first: int = 1, last: int | None = None, d: int | None = None, label: str = ""):
        m = linalg.as_square(matrix)
        if last is None:
            if d is None:
                raise ValueError("give either the last site or the local dimension d")
            n = _log_int(m.shape[0], d)
            last = first + n - 1
        if first < 1 or last < first:
            raise ValueError(f"invalid window [{first}, {last}]")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "window", (int(first), int(last)))
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "label", label)

    @property
    def first(self) -> int:
        return self.window[0]

    @property
    def last(self) -> int:
        return self.window[1]

    @property
    def n_sites(self) -> int:
        return self.last - self.first + 1

    def local_dim(self) -> int:
        d = round(self.matrix.shape[0] ** (1.0 / self.n_sites))
        if d**self.n_sites != self.matrix.shape[0]:
            raise DimensionError(f"matrix size {self.matrix.shape[0]} is not a power of {self.n_sites} sites")
        return d

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return linalg.is_hermitian(self.matrix, tol)

    @classmethod
    def product(cls, factors: Sequence[ArrayLike], first: int = 1, label: str = "") -> LocalObservable:
        """X₁ ⊗ ⋯ ⊗ X_N placed on consecutive sites starting at ``first``."""
        m = factors[0] if len(factors) == 1 else linalg.kron(*factors)
        return cls(m, first, first + len(factors) - 1, label=label)

    @classmethod
    def identity(cls, d: int, first: int = 1, last: int = 1) -> LocalObservable:
        return cls(np.eye(d ** (last - first + 1)), first, last, label="I")

    def extended(self, last: int) -> LocalObservable:
        """X ⊗ I padded up to site ``last``."""
        d = self.local_dim()
        pad = d ** (last - self.last)
        return LocalObservable(linalg.embed(self.matrix, 1, pad), self.first, last, label=self.label)


def _log_int(size: int, base: int) -> int:
    n, acc = 0, 1
    while acc < size:
        acc *= base
        n += 1
    if acc != size:
        raise DimensionError(f"{size} is not a power of {base}")
    return n


def _check_dim(chain: MPSChain, x: LocalObservable) -> None:
    expected = chain.physical_dim**x.n_sites
    if x.matrix.shape[0] != expected:
        raise DimensionError(f"observable on {x.n_sites} sites must be {expected}x{expected}, got {x.matrix.shape}")


def site_products(chain: MPSChain, first: int, last: int) -> NDArray[np.complex128]:
    """All products A_{i_first}⋯A_{i_last}, shape (d^N, D, D), first site slowest."""
    prods = chain.tensor(first)
    dim = chain.bond_dim
    for k in range(first + 1, last + 1):
        prods = np.einsum("pab,ibc->piac", prods, chain.tensor(k)).reshape(-1, dim, dim)
    return prods


def state_vector(chain: MPSChain, n: int, cap: int | None = None) -> NDArray[np.complex128]:
    """Unnormalized amplitudes Tr(A_{i_1}⋯A_{i_n}) for all multi-indices, i₁ slowest."""
    cap = STATE_CAP if cap is None else cap
    if n < 1:
        raise ValueError("n must be positive")
    if chain.physical_dim**n > cap:
        raise CapExceededError(f"d^n = {chain.physical_dim}^{n} exceeds the brute-force cap {cap}")
    return np.einsum("paa->p", site_products(chain, 1, n))


def transfer_channel(chain: MPSChain, k: int) -> SuperOperator:
    """Φ_k : M ↦ Σ_i A_i^[k]† M A_i^[k]."""
    return channel.from_kraus(chain.family(k))


def transfer_product(chain: MPSChain, first: int, last: int) -> SuperOperator:
    """Φ_last ∘ ⋯ ∘ Φ_first; the identity map when ``last < first``."""
    if chain.translation_invariant:
        return transfer_channel(chain, 1).power(max(0, last - first + 1))
    return channel.compose_all([transfer_channel(chain, k) for k in range(last, first - 1, -1)], chain.bond_dim)


def normalization(chain: MPSChain, n: int, method: Literal["transfer", "brute_force"] = "transfer", cap: int | None = None) -> float:
    """N(n) = Σ |Tr(A_{i_1}⋯A_{i_n})|² = Tr(Φ_n ∘ ⋯ ∘ Φ_1).

    Raises:
        DegenerateChainError: N(n) < 1e-14.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if method == "brute_force":
        value = float(np.sum(np.abs(state_vector(chain, n, cap)) ** 2))
    elif method == "transfer":
        value = float(channel.superop_trace(transfer_product(chain, 1, n)).real)
    else:
        raise ValueError(f"unknown method {method!r}")
    if value < DEGENERATE_NORM:
        raise DegenerateChainError(f"N({n}) = {value:.3g} vanishes")
    return value


def lift_observable(chain: MPSChain, x: LocalObservable, cap: int | None = None) -> SuperOperator:
    """X̂(M) = Σ ⟨i|X|j⟩ (A_{i_m}⋯A_{i_n})† M (A_{j_m}⋯A_{j_n}) on the window [m, n]."""
    cap = OBSERVABLE_CAP if cap is None else cap
    _check_dim(chain, x)
    if x.matrix.size > cap:
        raise CapExceededError(f"d^(2N) = {x.matrix.size} observable entries exceed the cap {cap}")
    prods = site_products(chain, x.first, x.last)
    dim = chain.bond_dim
    # kron(P_jᵀ, P_i†)[a*D + b, c*D + e] = P_j[c, a] * conj(P_i[e, b])
    mat = np.einsum("ij,jca,ieb->abce", x.matrix, prods, prods.conj()).reshape(dim * dim, dim * dim)
    return SuperOperator(mat)


def _lift_with_prefix(chain: MPSChain, x: LocalObservable, cap: int | None) -> SuperOperator:
    # X̂ ∘ Φ_{first-1} ∘ ⋯ ∘ Φ_1: identity on the sites left of the window
    return channel.compose(lift_observable(chain, x, cap), transfer_product(chain, 1, x.first - 1))


@dataclass(frozen=True)
class Expectation:
    """φ_n(X) with the value of each evaluation route."""

    value: complex
    method: str
    brute_force: complex | None
    transfer: complex | None

    @property
    def residual(self) -> float | None:
        if self.brute_force is None or self.transfer is None:
            return None
        return abs(self.brute_force - self.transfer)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "method": self.method,
            "brute_force": self.brute_force,
            "transfer": self.transfer,
            "residual": self.residual,
        }


def _brute_expectation(chain: MPSChain, x: LocalObservable, n: int, cap: int | None) -> complex:
    psi = state_vector(chain, n + 1, cap)
    d = chain.physical_dim
    psi = psi.reshape(d ** (x.first - 1), d**x.n_sites, d ** (n + 1 - x.last))
    num = np.einsum("aic,ij,ajc->", psi.conj(), x.matrix, psi)
    norm = float(np.vdot(psi, psi).real)
    if norm < DEGENERATE_NORM:
        raise DegenerateChainError(f"N({n + 1}) = {norm:.3g} vanishes")
    return complex(num / norm)


def _transfer_expectation(chain: MPSChain, x: LocalObservable, n: int, cap: int | None) -> complex:
    lifted = _lift_with_prefix(chain, x, cap)
    num = channel.superop_trace(channel.compose(transfer_product(chain, x.last + 1, n + 1), lifted))
    return num / normalization(chain, n + 1)


def expectation_detail(
    chain: MPSChain,
    x: LocalObservable,
    n: int,
    method: Literal["auto", "both", "transfer", "brute_force"] = "auto",
    cap: int | None = None,
) -> Expectation:
    """φ_n(X) = ⟨Ψ_{n+1}| X ⊗ I |Ψ_{n+1}⟩ / N(n+1) for X supported inside [1, n].

    ``auto`` runs both routes when the state vector fits under the cap, else the
    transfer route alone. When both run they must agree to 1e-10.
    """
    _check_dim(chain, x)
    if n < x.last:
        raise ValueError(f"n = {n} must cover the observable window ending at {x.last}")
    state_cap = STATE_CAP if cap is None else cap
    if method == "auto":
        method = "both" if chain.physical_dim ** (n + 1) <= state_cap else "transfer"
    brute = _brute_expectation(chain, x, n, cap) if method in ("both", "brute_force") else None
    transfer = _transfer_expectation(chain, x, n, cap) if method in ("both", "transfer") else None
    if brute is not None and transfer is not None:
        scale = max(1.0, linalg.max_abs(x.matrix))
        if abs(brute - transfer) > AGREEMENT_TOL * scale:
            raise NumericalError(f"state-vector and transfer evaluations disagree: {brute} vs {transfer}")
    value = transfer if transfer is not None else brute
    return Expectation(value=value, method=method, brute_force=brute, transfer=transfer)


def _real_if_hermitian(value: complex, x: LocalObservable) -> complex | float:
    if not x.is_hermitian():
        return value
    if abs(value.imag) > AGREEMENT_TOL * max(1.0, linalg.max_abs(x.matrix)):
        raise NumericalError(f"expectation of a Hermitian observable has imaginary part {value.imag:.3g}")
    return float(value.real)


def finite_expectation(chain: MPSChain, x: LocalObservable, n: int, method: str = "auto", cap: int | None = None):
    """φ_n(X); a float for Hermitian X, otherwise complex."""
    return _real_if_hermitian(expectation_detail(chain, x, n, method, cap).value, x)


def gauge_check(chain: MPSChain) -> list[float]:
    """max|Σ_i A_i A_i† - I| per defined site (one entry for translation-invariant chains)."""
    eye = np.eye(chain.bond_dim)
    return [linalg.max_abs(s.sum_a_adag() - eye) for s in chain.sites]


def projective_consistency_check(chain: MPSChain, n: int) -> list[float]:
    """Per index i: max|Σ_j A_j^[n+1]† A_i^[n]† ⊗ A_i^[n] A_j^[n+1] - A_i^[n]† ⊗ A_i^[n]|."""
    here, nxt = chain.family(n), chain.family(n + 1)
    out = []
    for a in here.operators:
        ad = a.conj().T
        lhs = sum(np.kron(b.conj().T @ ad, a @ b) for b in nxt.operators)
        out.append(linalg.max_abs(lhs - np.kron(ad, a)))
    return out


def consistency_residual(chain: MPSChain, last_site: int | None = None) -> float:
    """Worst consistency violation over every checkable pair of neighbouring sites."""
    if chain.translation_invariant:
        pairs = [1]
    else:
        end = len(chain.sites) if last_site is None else min(last_site, len(chain.sites))
        pairs = list(range(1, end))
    return max((max(projective_consistency_check(chain, n)) for n in pairs), default=0.0)


def projective_limit(chain: MPSChain, x: LocalObservable, tol: float | None = None, cap: int | None = None):
    """φ(X) = Tr(Φ_{N+1} ∘ X̂) / Tr(Φ_1) for chains satisfying the consistency identity.

    Raises:
        ConsistencyError: the identity fails somewhere along the chain; the limit
            formula is then not justified and no value is returned.
    """
    tol = linalg.get_tol() if tol is None else tol
    _check_dim(chain, x)
    residual = consistency_residual(chain)
    if residual > tol:
        raise ConsistencyError(f"consistency identity violated by {residual:.3g}", {"residual": residual})
    num = channel.superop_trace(channel.compose(transfer_channel(chain, x.last + 1), _lift_with_prefix(chain, x, cap)))
    den = channel.superop_trace(transfer_channel(chain, 1))
    if abs(den) < DEGENERATE_NORM:
        raise DegenerateChainError("Tr(Φ_1) vanishes")
    return _real_if_hermitian(num / den, x)


def ergodic_limit(chain: MPSChain, x: LocalObservable, cap: int | None = None):
    """φ(X) = Σ_{α,β} (ρ*)_{αβ} Tr(X̂(e_α e_β†)) for a mixing translation-invariant chain.

    Sites left of the window contribute their transfer maps before X̂.

    Raises:
        NotErgodicError: the transfer channel is not mixing (report attached).
    """
    if not chain.translation_invariant:
        raise ValueError("the ergodic limit needs a translation-invariant chain")
    _check_dim(chain, x)
    report = channel.spectral_classification(transfer_channel(chain, 1))
    if not report.mixing:
        raise NotErgodicError("transfer channel is not mixing", report)
    rho = report.fixed_point
    lifted = _lift_with_prefix(chain, x, cap)
    dim = chain.bond_dim
    value = 0j
    for a in range(dim):
        for b in range(dim):
            value += rho[a, b] * np.trace(lifted(linalg.matrix_unit(dim, a, b)))
    return _real_if_hermitian(complex(value), x)


@dataclass(frozen=True)
class IdentityCheck:
    passed: bool
    residual: float
    lhs: complex
    rhs: complex


def trace_product_identity_check(
    chain: MPSChain, n: int, k: int, i: Sequence[int], j: Sequence[int], tol: float = 1e-12
) -> IdentityCheck:
    """Both sides of the trace factorization conj(Tr(A_i⋯)) Tr(A_j⋯) for one index pair.

    ``i`` has length n + k. The trailing k indices are shared between both words,
    so ``j`` may be given with length n, or n + k with a tail equal to ``i``'s.
    """
    if len(i) != n + k:
        raise ValueError(f"i needs {n + k} indices, got {len(i)}")
    if len(j) == n + k:
        if tuple(j[n:]) != tuple(i[n:]):
            raise ValueError("the identity holds only when the trailing k indices coincide")
        j = j[:n]
    elif len(j) != n:
        raise ValueError(f"j needs {n} or {n + k} indices, got {len(j)}")
    dim = chain.bond_dim

    def word(indices: Sequence[int], start: int) -> CMatrix:
        out = np.eye(dim, dtype=np.complex128)
        for site, idx in enumerate(indices, start=start):
            out = out @ chain.family(site)[idx]
        return out

    full_i = word(i, 1)
    full_j = word(list(j) + list(i[n:]), 1)
    lhs = complex(np.conj(np.trace(full_i)) * np.trace(full_j))

    head_i, head_j, tail = word(i[:n], 1), word(j, 1), word(i[n:], n + 1)
    rhs = complex(np.trace(np.kron(head_i.conj().T, head_j) @ np.kron(tail.conj().T, tail)))
    residual = abs(lhs - rhs)
    return IdentityCheck(passed=residual <= tol, residual=residual, lhs=lhs, rhs=rhs)


def default_probe_set(d: int) -> list[LocalObservable]:
    """Single-site matrix units and a Hermitian (generalized Pauli) basis at site 1."""
    probes = [LocalObservable(linalg.matrix_unit(d, a, b), 1, 1, label=f"E{a}{b}") for a in range(d) for b in range(d)]
    for a in range(d):
        for b in range(a + 1, d):
            sx = linalg.matrix_unit(d, a, b) + linalg.matrix_unit(d, b, a)
            sy = -1j * linalg.matrix_unit(d, a, b) + 1j * linalg.matrix_unit(d, b, a)
            probes.append(LocalObservable(sx, 1, 1, label=f"X{a}{b}"))
            probes.append(LocalObservable(sy, 1, 1, label=f"Y{a}{b}"))
        if a > 0:
            probes.append(LocalObservable(linalg.matrix_unit(d, 0, 0) - linalg.matrix_unit(d, a, a), 1, 1, label=f"Z0{a}"))
    return probes


@dataclass(frozen=True)
class ProjectivityReport:
    """Violations |φ_{n+1}(X ⊗ I) - φ_n(X)| maximized over probes, per n."""

    n_range: list[int]
    max_violation: list[float]
    verdict: Literal["projective", "non_projective"]
    probe_labels: list[str] = field(default_factory=list)
    limit_method: str | None = None
    limit_values: list[complex] | None = None
    limit_gaps: list[float] | None = None

    def to_dict(self) -> dict:
        return {
            "n_range": self.n_range,
            "max_violation": self.max_violation,
            "verdict": self.verdict,
            "probes": self.probe_labels,
            "limit_method": self.limit_method,
            "limit_values": self.limit_values,
            "limit_gaps": self.limit_gaps,
        }


def _limit_values(chain: MPSChain, probes: Sequence[LocalObservable], tol: float):
    if consistency_residual(chain) <= tol:
        return "projective_limit", [complex(projective_limit(chain, x, tol)) for x in probes]
    if chain.translation_invariant:
        try:
            return "ergodic_limit", [complex(ergodic_limit(chain, x)) for x in probes]
        except (NotErgodicError, NumericalError):
            return None, None
    return None, None


def projectivity_probe(
    chain: MPSChain,
    n_range: Iterable[int],
    probes: Sequence[LocalObservable] | None = None,
    tol: float | None = None,
    cap: int | None = None,
    with_limit: bool = True,
) -> ProjectivityReport:
    """Numerical projectivity test over a probe set.

    ``limit_gaps`` compares φ_n for the first n in the range against the infinite-volume
    value (projective or ergodic limit, whichever applies).
    """
    tol = linalg.get_tol() if tol is None else tol
    probes = default_probe_set(chain.physical_dim) if probes is None else list(probes)
    ns = list(n_range)
    cache: dict[tuple[int, int], complex] = {}

    def phi(p: int, n: int) -> complex:
        if (p, n) not in cache:
            cache[(p, n)] = expectation_detail(chain, probes[p], n, "auto", cap).value
        return cache[(p, n)]

    violations = []
    for n in ns:
        worst = 0.0
        for p, x in enumerate(probes):
            if n < x.last:
                continue
            worst = max(worst, abs(phi(p, n + 1) - phi(p, n)))
        violations.append(worst)
    verdict = "non_projective" if any(v > 100 * tol for v in violations) else "projective"

    method = values = gaps = None
    if with_limit and ns:
        method, values = _limit_values(chain, probes, tol)
        if values is not None:
            n0 = ns[0]
            gaps = [abs(phi(p, max(n0, x.last)) - values[p]) for p, x in enumerate(probes)]
    return ProjectivityReport(
        n_range=ns,
        max_violation=violations,
        verdict=verdict,
        probe_labels=[x.label for x in probes],
        limit_method=method,
        limit_values=values,
        limit_gaps=gaps,
    )
