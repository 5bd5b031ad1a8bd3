"""Finite state spaces, transition matrices, bijections, and chain builders.

State spaces are always {0, ..., n-1}. A transition matrix is dense,
row-stochastic, 64-bit float. Structured states (hypercube bit vectors)
are encoded by a documented index map. Everything here is immutable after
construction and safe to share across threads.

The standing assumptions checked by :func:`validate` are:

1. irreducible (support graph strongly connected); together with a
   positive diagonal this also gives aperiodicity,
2. symmetric support: p[i][j] > 0 iff p[j][i] > 0,
3. positive diagonal: p[i][i] > 0 for every i,
4. uniform stationary distribution, i.e. the matrix is doubly stochastic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import BijectionError, CapacityError, StructureError

# Dense-matrix size cap: n*n float64 entries stay comfortably in memory.
MATRIX_SIZE_CAP = 4096
# Tolerance for row/column sums of stochastic matrices.
STOCHASTIC_TOL = 1e-9
# Tolerance for probability vectors.
DISTRIBUTION_TOL = 1e-12


def _as_readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=np.float64, copy=True, order="C")
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """A dense row-stochastic matrix over states {0, ..., n-1}.

    Construction enforces only the structural contract (square shape,
    entries in [0, 1], rows summing to 1 within ``STOCHASTIC_TOL``).
    The four standing chain assumptions are checked separately by
    :func:`validate`, so that a malformed chain can still be loaded
    and reported on.
    """

    entries: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise StructureError(f"transition matrix must be square, got shape {a.shape}")
        n = a.shape[0]
        if n == 0:
            raise StructureError("transition matrix must have at least one state")
        if n > MATRIX_SIZE_CAP:
            raise CapacityError(
                f"n={n} exceeds the dense matrix cap MATRIX_SIZE_CAP={MATRIX_SIZE_CAP}"
            )
        if not np.all(np.isfinite(a)):
            raise StructureError("transition matrix contains non-finite entries")
        if np.any(a < 0.0) or np.any(a > 1.0 + STOCHASTIC_TOL):
            i, j = np.unravel_index(int(np.argmin(a)) if np.any(a < 0) else int(np.argmax(a)), a.shape)
            raise StructureError(f"entry out of [0, 1] at ({i}, {j}): {a[i, j]!r}")
        rowsums = a.sum(axis=1)
        bad = np.flatnonzero(np.abs(rowsums - 1.0) > STOCHASTIC_TOL)
        if bad.size:
            i = int(bad[0])
            raise StructureError(f"row {i} sums to {rowsums[i]!r}, expected 1 within {STOCHASTIC_TOL}")
        object.__setattr__(self, "entries", _as_readonly(a))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def support(self) -> np.ndarray:
        """Boolean adjacency of strictly positive entries."""
        return self.entries > 0.0

    @property
    def is_doubly_stochastic(self) -> bool:
        return bool(np.all(np.abs(self.entries.sum(axis=0) - 1.0) <= STOCHASTIC_TOL))


@dataclass(frozen=True)
class Permutation:
    """A bijection f on {0, ..., n-1}, stored with its inverse."""

    forward: tuple[int, ...]
    inverse: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        n = len(self.forward)
        fwd = tuple(int(v) for v in self.forward)
        seen = [False] * n
        for i, v in enumerate(fwd):
            if not 0 <= v < n:
                raise BijectionError(f"image {v} at position {i} outside [0, {n})")
            if seen[v]:
                raise BijectionError(f"image {v} repeated; map is not a bijection")
            seen[v] = True
        inv = [0] * n
        for i, v in enumerate(fwd):
            inv[v] = i
        object.__setattr__(self, "forward", fwd)
        object.__setattr__(self, "inverse", tuple(inv))

    @property
    def n(self) -> int:
        return len(self.forward)

    def __call__(self, i: int) -> int:
        return self.forward[i]

    def matrix(self) -> np.ndarray:
        """The permutation matrix with a 1 at (i, f(i))."""
        m = np.zeros((self.n, self.n))
        m[np.arange(self.n), np.asarray(self.forward)] = 1.0
        return m

    def image(self, indices: Iterable[int]) -> set[int]:
        return {self.forward[i] for i in indices}


@dataclass(frozen=True, eq=False)
class Distribution:
    """A probability vector over {0, ..., n-1}."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise StructureError(f"distribution must be a nonempty vector, got shape {p.shape}")
        if np.any(p < 0.0):
            raise StructureError("distribution has a negative entry")
        s = float(p.sum())
        if abs(s - 1.0) > DISTRIBUTION_TOL:
            raise StructureError(f"distribution sums to {s!r}, expected 1 within {DISTRIBUTION_TOL}")
        object.__setattr__(self, "probs", _as_readonly(p))

    @property
    def n(self) -> int:
        return self.probs.shape[0]

    @staticmethod
    def uniform(n: int) -> "Distribution":
        return Distribution(np.full(n, 1.0 / n))

    @staticmethod
    def point_mass(i: int, n: int) -> "Distribution":
        p = np.zeros(n)
        p[i] = 1.0
        return Distribution(p)


@dataclass(frozen=True)
class ValidationReport:
    """Pass/fail for each standing assumption, with one offending index pair.

    ``violations`` maps a failed check name to the first offending pair:
    for ``irreducible`` a pair (i, j) with j unreachable from i; for
    ``symmetric_support`` the first row-major (i, j) where support is
    one-sided; for ``positive_diagonal`` the first (i, i) with a zero
    diagonal; for ``uniform_stationary`` (j, j) for the first column j
    whose sum is off.
    """

    irreducible: bool
    symmetric_support: bool
    positive_diagonal: bool
    uniform_stationary: bool
    violations: dict[str, tuple[int, int]]

    @property
    def aperiodic(self) -> bool:
        # A positive diagonal makes an irreducible chain aperiodic.
        return self.irreducible and self.positive_diagonal

    @property
    def ok(self) -> bool:
        return (
            self.irreducible
            and self.symmetric_support
            and self.positive_diagonal
            and self.uniform_stationary
        )


def _reachable_from(adj: np.ndarray, start: int) -> np.ndarray:
    """BFS reachability over a boolean adjacency matrix."""
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[start] = True
    frontier = [start]
    while frontier:
        nxt = adj[frontier].any(axis=0) & ~seen
        frontier = list(np.flatnonzero(nxt))
        seen |= nxt
    return seen


def validate(P: TransitionMatrix) -> ValidationReport:
    """Check the four standing assumptions on a structurally valid matrix."""
    a = P.entries
    n = P.n
    supp = a > 0.0
    violations: dict[str, tuple[int, int]] = {}

    fwd = _reachable_from(supp, 0)
    irreducible = bool(fwd.all())
    if not irreducible:
        violations["irreducible"] = (0, int(np.flatnonzero(~fwd)[0]))
    else:
        bwd = _reachable_from(supp.T, 0)
        irreducible = bool(bwd.all())
        if not irreducible:
            violations["irreducible"] = (int(np.flatnonzero(~bwd)[0]), 0)

    asym = supp != supp.T
    symmetric_support = not bool(asym.any())
    if not symmetric_support:
        i, j = np.argwhere(asym)[0]
        violations["symmetric_support"] = (int(i), int(j))

    diag = np.diag(a)
    positive_diagonal = bool(np.all(diag > 0.0))
    if not positive_diagonal:
        i = int(np.flatnonzero(diag <= 0.0)[0])
        violations["positive_diagonal"] = (i, i)

    colsums = a.sum(axis=0)
    bad = np.flatnonzero(np.abs(colsums - 1.0) > STOCHASTIC_TOL)
    uniform_stationary = bad.size == 0
    if not uniform_stationary:
        j = int(bad[0])
        violations["uniform_stationary"] = (j, j)

    return ValidationReport(
        irreducible=irreducible,
        symmetric_support=symmetric_support,
        positive_diagonal=positive_diagonal,
        uniform_stationary=uniform_stationary,
        violations=violations,
    )


def build_lazy_cycle_walk(n: int) -> TransitionMatrix:
    """Lazy walk on the n-cycle: stay, step left, or step right, each 1/3."""
    if n < 3:
        raise ValueError(f"lazy cycle walk needs n >= 3, got {n}")
    a = np.zeros((n, n))
    idx = np.arange(n)
    a[idx, idx] = 1.0 / 3.0
    a[idx, (idx + 1) % n] = 1.0 / 3.0
    a[idx, (idx - 1) % n] = 1.0 / 3.0
    return TransitionMatrix(a)


def build_hypercube_walk(d: int) -> TransitionMatrix:
    """Lazy walk on {0,1}^d: stay or flip one coordinate, each 1/(d+1).

    State x is encoded as the integer with bit i equal to coordinate i,
    so flipping coordinate i maps index s to s XOR 2^i.
    """
    if d < 1:
        raise ValueError(f"hypercube walk needs d >= 1, got {d}")
    n = 1 << d
    if n > MATRIX_SIZE_CAP:
        raise CapacityError(
            f"hypercube d={d} has n={n} states, over MATRIX_SIZE_CAP={MATRIX_SIZE_CAP}"
        )
    a = np.zeros((n, n))
    p = 1.0 / (d + 1)
    idx = np.arange(n)
    a[idx, idx] = p
    for i in range(d):
        a[idx, idx ^ (1 << i)] = p
    return TransitionMatrix(a)


def min_positive_entry(P: TransitionMatrix) -> float:
    """The smallest strictly positive transition probability."""
    pos = P.entries[P.entries > 0.0]
    if pos.size == 0:
        raise StructureError("matrix has no positive entries")
    return float(pos.min())


def compose(f: Permutation, P: TransitionMatrix) -> TransitionMatrix:
    """One step of the jump-then-move chain: apply f, then take a P-step.

    Row i of the result is row f(i) of P. Composing with any bijection
    preserves double stochasticity.
    """
    if f.n != P.n:
        raise StructureError(f"dimension mismatch: permutation on {f.n}, matrix on {P.n}")
    return TransitionMatrix(P.entries[np.asarray(f.forward)])


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    k = 3
    while k * k <= n:
        if n % k == 0:
            return False
        k += 2
    return True


def identity_permutation(n: int) -> Permutation:
    return Permutation(tuple(range(n)))


def affine_permutation(n: int, a: int) -> Permutation:
    """i -> a*i mod n; a bijection iff gcd(a, n) = 1."""
    if math.gcd(a, n) != 1:
        raise BijectionError(f"i -> {a}*i mod {n} is not a bijection: gcd({a}, {n}) != 1")
    return Permutation(tuple((a * i) % n for i in range(n)))


def doubling_permutation(n: int) -> Permutation:
    """i -> 2i mod n; requires odd n."""
    return affine_permutation(n, 2)


def cubing_permutation(n: int) -> Permutation:
    """i -> i^3 mod n; requires n prime with gcd(3, n-1) = 1."""
    if not _is_prime(n):
        raise BijectionError(f"cubing map needs a prime modulus, got {n}")
    if math.gcd(3, n - 1) != 1:
        raise BijectionError(f"cubing map mod {n} is not a bijection: gcd(3, {n - 1}) != 1")
    perm = Permutation(tuple(pow(i, 3, n) for i in range(n)))
    return perm


def inversion_permutation(n: int) -> Permutation:
    """0 -> 0 and j -> j^-1 mod n for j != 0; requires n prime."""
    if not _is_prime(n):
        raise BijectionError(f"inversion map needs a prime modulus, got {n}")
    return Permutation((0,) + tuple(pow(j, n - 2, n) for j in range(1, n)))


def random_permutation(n: int, seed: int) -> Permutation:
    """A uniformly random bijection, reproducible from the seed.

    Fisher-Yates driven by the Philox counter-based generator, so the
    same seed yields the same permutation on every platform.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    fwd = list(range(n))
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        fwd[i], fwd[j] = fwd[j], fwd[i]
    return Permutation(tuple(fwd))


def explicit_permutation(values: Sequence[int]) -> Permutation:
    return Permutation(tuple(int(v) for v in values))


def build_permutation(kind: str, n: int, *, a: int | None = None,
                      seed: int | None = None,
                      values: Sequence[int] | None = None) -> Permutation:
    """Dispatch on a named permutation family.

    Kinds: identity, doubling, affine (needs ``a``), cubing, inversion,
    random (needs ``seed``), explicit (needs ``values``).
    """
    if kind == "identity":
        return identity_permutation(n)
    if kind == "doubling":
        return doubling_permutation(n)
    if kind == "affine":
        if a is None:
            raise ValueError("affine permutation needs parameter a")
        return affine_permutation(n, a)
    if kind == "cubing":
        return cubing_permutation(n)
    if kind == "inversion":
        return inversion_permutation(n)
    if kind == "random":
        if seed is None:
            raise ValueError("random permutation needs an explicit seed")
        return random_permutation(n, seed)
    if kind == "explicit":
        if values is None:
            raise ValueError("explicit permutation needs a value list")
        if len(values) != n:
            raise BijectionError(f"explicit permutation has {len(values)} values, expected {n}")
        return explicit_permutation(values)
    raise ValueError(f"unknown permutation kind {kind!r}")


def load_matrix_csv(path: str | Path) -> tuple[TransitionMatrix, ValidationReport]:
    """Load a transition matrix from CSV (n rows of n decimal entries).

    The loader also runs :func:`validate` so callers immediately see
    which standing assumptions the loaded chain satisfies.
    """
    path = Path(path)
    try:
        raw = np.loadtxt(path, delimiter=",", ndmin=2)
    except OSError as exc:
        raise StructureError(f"cannot read matrix file {path}: {exc}") from exc
    except ValueError as exc:
        raise StructureError(f"malformed matrix CSV {path}: {exc}") from exc
    P = TransitionMatrix(raw)
    return P, validate(P)


def save_matrix_csv(path: str | Path, P: TransitionMatrix) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in P.entries:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_permutation(path: str | Path) -> Permutation:
    """Load a permutation: one line of n whitespace-separated 0-based integers."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise StructureError(f"cannot read permutation file {path}: {exc}") from exc
    try:
        values = [int(tok) for tok in text.split()]
    except ValueError as exc:
        raise StructureError(f"malformed permutation file {path}: {exc}") from exc
    return explicit_permutation(values)


def save_permutation(path: str | Path, f: Permutation) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(" ".join(str(v) for v in f.forward) + "\n")
