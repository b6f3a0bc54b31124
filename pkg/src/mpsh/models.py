"""Built-in chains with closed-form reference values.

The closed forms here are evaluated directly from their formulas and never route
through :mod:`mpsh.mps`, so they can serve as independent oracles for it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike

from mpsh import linalg
from mpsh.channel import KrausFamily
from mpsh.errors import CapExceededError
from mpsh.linalg import CMatrix, SIGMA_X, SIGMA_Y, SIGMA_Z
from mpsh.mps import OBSERVABLE_CAP, LocalObservable, MPSChain, gauge_check


@dataclass(frozen=True)
class ModelBundle:
    chain: MPSChain
    closed_forms: dict[str, Callable] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        worst = max(gauge_check(self.chain))
        if worst >= 1e-12:
            raise ValueError(f"model violates the gauge condition by {worst:.3g}")


GHZ_MATRICES = (
    np.array([[1, 0], [0, 0]], dtype=np.complex128),
    np.array([[0, 0], [0, 1]], dtype=np.complex128),
)


def ghz_chain() -> MPSChain:
    return MPSChain.uniform(GHZ_MATRICES)


def ghz_product_closed_form(factors: list[ArrayLike]) -> complex:
    """½ Σ_ℓ x_{1;ℓℓ} ⋯ x_{N;ℓℓ} for X = X₁ ⊗ ⋯ ⊗ X_N."""
    return 0.5 * sum(math.prod(complex(np.asarray(f)[l, l]) for f in factors) for l in range(2))


def ghz_closed_form(x: LocalObservable | ArrayLike, cap: int = OBSERVABLE_CAP) -> complex:
    """GHZ limit state on a dense observable: ½(⟨0…0|X|0…0⟩ + ⟨1…1|X|1…1⟩).

    This is the linear extension of the product formula; product operators reduce to it.
    """
    m = x.matrix if isinstance(x, LocalObservable) else linalg.as_square(x)
    if m.size > cap:
        raise CapExceededError(f"observable with {m.size} entries exceeds cap {cap}")
    return 0.5 * complex(m[0, 0] + m[-1, -1])


def ghz_model() -> ModelBundle:
    return ModelBundle(
        chain=ghz_chain(),
        closed_forms={"phi": ghz_closed_form, "phi_product": ghz_product_closed_form},
        notes=["diagonal projector site tensors; amplitudes are 1 on the all-equal strings"],
    )


def _check_p(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing parameter p must lie in [0, 1], got {p}")
    return p


def depolarizing_kraus(p: float) -> tuple[CMatrix, ...]:
    """A₀ = √(1-p) I, A₁₋₃ = √(p/3) σ_{x,y,z}; physical index k ↔ A_k."""
    p = _check_p(p)
    s = math.sqrt(p / 3.0)
    return (math.sqrt(1.0 - p) * linalg.I2, s * SIGMA_X, s * SIGMA_Y, s * SIGMA_Z)


def depolarizing_chain(p: float) -> MPSChain:
    return MPSChain.uniform(depolarizing_kraus(p))


def depolarizing_action(rho: ArrayLike, p: float) -> CMatrix:
    """Closed-form channel action in matrix entries."""
    r = linalg.as_square(rho)
    a, b = 1.0 - 2.0 * p / 3.0, 2.0 * p / 3.0
    off = 1.0 - 4.0 * p / 3.0
    return np.array(
        [[a * r[0, 0] + b * r[1, 1], off * r[0, 1]], [off * r[1, 0], a * r[1, 1] + b * r[0, 0]]],
        dtype=np.complex128,
    )


def depolarizing_kappa(p: float) -> CMatrix:
    return (2.0 * _check_p(p) / 3.0) * np.eye(2, dtype=np.complex128)


def depolarizing_norm2(p: float) -> float:
    """N(2) = 4((1-p)² + p²/3)."""
    return 4.0 * ((1.0 - p) ** 2 + p**2 / 3.0)


def depolarizing_phi1_ground(p: float) -> float:
    """φ₁(|0⟩⟨0|) = (1-p)² / ((1-p)² + p²/3)."""
    return (1.0 - p) ** 2 / ((1.0 - p) ** 2 + p**2 / 3.0)


def depolarizing_closed_form(x: LocalObservable | ArrayLike, p: float, cap: int = OBSERVABLE_CAP) -> complex:
    """½ Σ ⟨i|X|j⟩ Tr(A_{i_N}†⋯A_{i_1}† A_{j_1}⋯A_{j_N}) evaluated by direct summation."""
    m = x.matrix if isinstance(x, LocalObservable) else linalg.as_square(x)
    if m.size > cap:
        raise CapExceededError(f"observable with {m.size} entries exceeds cap {cap}")
    ops = depolarizing_kraus(p)
    n = round(math.log(m.shape[0], 4))
    words = [np.eye(2, dtype=np.complex128)]
    for _ in range(n):
        words = [w @ a for w in words for a in ops]
    total = 0j
    for i, wi in enumerate(words):
        wi_dag = wi.conj().T
        for j, wj in enumerate(words):
            if m[i, j] != 0:
                total += m[i, j] * np.trace(wi_dag @ wj)
    return 0.5 * total


def depolarizing_limit_ground(p: float) -> float:
    """φ(|0⟩⟨0|) = 1 - p."""
    return 1.0 - p


def depolarizing_model(p: float) -> ModelBundle:
    p = _check_p(p)
    return ModelBundle(
        chain=depolarizing_chain(p),
        closed_forms={
            "action": lambda rho: depolarizing_action(rho, p),
            "kappa": lambda: depolarizing_kappa(p),
            "norm2": lambda: depolarizing_norm2(p),
            "phi1_ground": lambda: depolarizing_phi1_ground(p),
            "phi": lambda x: depolarizing_closed_form(x, p),
            "phi_ground": lambda: depolarizing_limit_ground(p),
            "rho_star": lambda: 0.5 * np.eye(2, dtype=np.complex128),
        },
        notes=[f"p = {p!r}", "physical index 0 carries sqrt(1-p) I"],
    )


def random_gauge_family(d: int, dim: int, rng: np.random.Generator) -> KrausFamily:
    """d matrices with Σ AᵢAᵢ† = I from the orthonormalized rows of a Ginibre matrix."""
    g = rng.standard_normal((dim, d * dim)) + 1j * rng.standard_normal((dim, d * dim))
    q, _ = np.linalg.qr(g.conj().T)  # (dD × D), orthonormal columns
    w = q.conj().T  # orthonormal rows
    return KrausFamily([w[:, i * dim : (i + 1) * dim] for i in range(d)], "heisenberg")


def random_gauge_chain(d: int, dim: int, n_sites: int | None = None, seed: int = 0) -> MPSChain:
    """Random chain obeying the gauge condition; translation invariant when ``n_sites`` is None."""
    rng = np.random.default_rng(seed)
    if n_sites is None:
        return MPSChain(random_gauge_family(d, dim, rng), True)
    return MPSChain([random_gauge_family(d, dim, rng) for _ in range(n_sites)], False)


def projector_chain(d: int, dim: int, seed: int = 0) -> MPSChain:
    """Translation-invariant chain of mutually orthogonal projectors summing to I.

    The D basis vectors of a random unitary are split into d nonempty groups; each
    group spans one projector. Generalizes the GHZ tensors (d = D = 2, identity basis).
    """
    if d > dim:
        raise ValueError("need d <= D for nonzero orthogonal projectors")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    u, _ = np.linalg.qr(g)
    cuts = np.sort(rng.choice(np.arange(1, dim), size=d - 1, replace=False)) if d > 1 else []
    groups = np.split(np.arange(dim), cuts)
    return MPSChain.uniform([u[:, grp] @ u[:, grp].conj().T for grp in groups])


def model_by_name(name: str, p: float | None = None, d: int = 2, dim: int = 2, seed: int = 0, n_sites: int | None = None) -> MPSChain:
    """CLI-facing constructor for ``ghz``, ``depolarizing`` and ``random``."""
    if name == "ghz":
        return ghz_chain()
    if name == "depolarizing":
        if p is None:
            raise ValueError("the depolarizing model needs p")
        return depolarizing_chain(p)
    if name == "random":
        return random_gauge_chain(d, dim, n_sites, seed)
    raise ValueError(f"unknown model {name!r}")
