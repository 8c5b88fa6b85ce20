"""Discrete optimal transport for the costs that arise from portfolio maps.

Four costs are supported (``x`` from the source measure, ``y`` from the target):

``log_partition``
    ``log sum_i exp(y_i) x_i`` for a market weight ``x`` and a log-tilt ``y``
    whose entries may be ``-inf``.
``exp_shift``
    ``psi(x - y)`` in exponential coordinates.
``neg_entropy``
    ``-sum_i y_i log(y_i / x_i)`` for simplex points.
``quadratic``
    ``|x - y|**2``.

The solver is an exact transportation simplex: costs are rounded to integer
multiples of ``1e-12``, masses are rationals, and infinite costs are arcs
that may never carry mass.
"""

import csv
import enum
import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .exceptions import DomainError, InfeasibleTransportError
from .simplex import from_exponential, psi, to_exponential
from .calculus import PortfolioMap
from .validation import apply_rowwise

COST_SCALE = 10**12
MAX_BRUTE_FORCE = 8
MONOTONE_TOL = 1e-9


class CostKind(str, enum.Enum):
    LOG_PARTITION = "log_partition"
    EXP_SHIFT = "exp_shift"
    NEG_ENTROPY = "neg_entropy"
    QUADRATIC = "quadratic"


def _kind(kind):
    try:
        return CostKind(kind)
    except ValueError:
        raise ValueError(f"unknown cost kind {kind!r}") from None


def cost_matrix(kind, xs, ys):
    """Cost between every source atom in ``xs`` and target atom in ``ys``.

    Returns an array of shape ``(len(xs), len(ys))``; ``+inf`` marks pairs
    that cannot be coupled.
    """
    kind = _kind(kind)
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    if xs.shape[1] != ys.shape[1] and kind is not CostKind.EXP_SHIFT:
        raise DomainError("source and target atoms have different dimensions")
    if kind is CostKind.LOG_PARTITION:
        if np.any(np.all(np.isneginf(ys), axis=1)):
            raise DomainError("log-partition target with every entry -inf")
        if np.any(xs < 0):
            raise DomainError("log-partition source atoms must be market weights")
        with np.errstate(divide="ignore"):
            logits = np.log(xs)[:, None, :] + ys[None, :, :]
        top = np.max(logits, axis=-1)
        safe = np.where(np.isfinite(top), top, 0.0)
        with np.errstate(invalid="ignore"):
            s = np.sum(np.exp(logits - safe[..., None]), axis=-1)
        # a target that only loads stocks with zero weight makes the tilt undefined
        return np.where(np.isfinite(top), safe + np.log(s), np.inf)
    if kind is CostKind.EXP_SHIFT:
        return psi(xs[:, None, :] - ys[None, :, :])
    if kind is CostKind.NEG_ENTROPY:
        if np.any(xs < 0) or np.any(ys < 0):
            raise DomainError("relative entropy needs points of the closed simplex")
        p = xs[:, None, :]
        q = ys[None, :, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(q > 0, q * (np.log(q) - np.log(p)), 0.0)
        out = -np.sum(terms, axis=-1)
        # a target charging a stock the source does not hold is excluded, not rewarded
        return np.where(np.any((q > 0) & (p == 0), axis=-1), np.inf, out)
    d = xs[:, None, :] - ys[None, :, :]
    return np.sum(d * d, axis=-1)


def cost(kind, x, y):
    """Cost of moving source point ``x`` to target point ``y``.

    >>> round(cost("exp_shift", [0.3], [0.3]), 6)
    0.693147
    """
    return float(cost_matrix(kind, [x], [y])[0, 0])


@dataclass
class DiscreteMeasure:
    """Finitely supported probability measure.

    ``atoms`` has shape ``(k, d)`` (entries may be ``-inf`` for log-tilts),
    ``weights`` shape ``(k,)``.
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size != self.atoms.shape[0] or w.size == 0:
            raise DomainError("need one nonnegative weight per atom")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise DomainError("measure weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise DomainError(f"measure weights sum to {w.sum():.15g}, not 1")
        if np.unique(self.atoms, axis=0).shape[0] != self.atoms.shape[0]:
            raise DomainError("atoms must be distinct")
        self.weights = w / w.sum()

    @classmethod
    def uniform(cls, atoms):
        atoms = np.atleast_2d(np.asarray(atoms, dtype=float))
        return cls(atoms, np.full(atoms.shape[0], 1.0 / atoms.shape[0]))

    def __len__(self):
        return self.atoms.shape[0]

    def to_dict(self):
        return {"atoms": _encode_atoms(self.atoms), "weights": self.weights.tolist()}


@dataclass
class Coupling:
    """Sparse coupling: ``entries`` lists ``(i, j, mass)`` with positive mass."""

    entries: list
    value: float

    def matrix(self, shape):
        m = np.zeros(shape)
        for i, j, mass in self.entries:
            m[i, j] += mass
        return m

    def support(self):
        return [(i, j) for i, j, _ in self.entries]

    def target_of(self, i):
        """Target index receiving the largest mass from source ``i`` (lowest index on ties)."""
        best = None
        for a, j, mass in self.entries:
            if a == i and (best is None or mass > best[1] or (mass == best[1] and j < best[0])):
                best = (j, mass)
        return None if best is None else best[0]


def _exact_weights(w):
    fr = [Fraction(float(x)).limit_denominator(COST_SCALE) for x in w]
    total = sum(fr)
    return [x / total for x in fr]


def _integer_costs(c):
    """Round finite costs to multiples of 1e-12; ``None`` marks infinite cost."""
    if np.any(np.isneginf(c)) or np.any(np.isnan(c)):
        raise DomainError("cost matrix has -inf or nan entries")
    return [[None if math.isinf(v) else int(round(v * COST_SCALE)) for v in row] for row in c]


def _value(entries, cint):
    total = sum(mass * cint[i][j] for i, j, mass in entries)
    return float(Fraction(total) / COST_SCALE)


def _tree_potentials(basis, m, k, cost):
    adj_row = [[] for _ in range(m)]
    adj_col = [[] for _ in range(k)]
    for i, j in basis:
        adj_row[i].append(j)
        adj_col[j].append(i)
    u = [None] * m
    v = [None] * k
    u[0] = 0
    stack = [("r", 0)]
    while stack:
        side, idx = stack.pop()
        if side == "r":
            for j in adj_row[idx]:
                if v[j] is None:
                    v[j] = cost[idx][j] - u[idx]
                    stack.append(("c", j))
        else:
            for i in adj_col[idx]:
                if u[i] is None:
                    u[i] = cost[i][idx] - v[idx]
                    stack.append(("r", i))
    return u, v


def _tree_path(basis, m, k, start_row, end_col):
    """Alternating path of basic cells from row ``start_row`` to column ``end_col``."""
    adj = {}
    for i, j in basis:
        adj.setdefault(("r", i), []).append(("c", j))
        adj.setdefault(("c", j), []).append(("r", i))
    parent = {("r", start_row): None}
    queue = [("r", start_row)]
    for node in queue:
        if node == ("c", end_col):
            break
        for nxt in sorted(adj.get(node, [])):
            if nxt not in parent:
                parent[nxt] = node
                queue.append(nxt)
    cells = []
    node = ("c", end_col)
    while parent[node] is not None:
        prev = parent[node]
        cells.append((prev[1], node[1]) if prev[0] == "r" else (node[1], prev[1]))
        node = prev
    return cells[::-1]


def _transportation_simplex(a, b, cint):
    """Exact transportation simplex with a symbolic big-M penalty on masked arcs."""
    m, k = len(a), len(b)
    finite = [c for row in cint for c in row if c is not None]
    big = (sum(abs(c) for c in finite) + 1) * 4 * (m + k)
    cost = [[big if c is None else c for c in row] for row in cint]
    # northwest-corner start: a staircase spanning tree with m + k - 1 cells
    flow = {}
    ra, rb = list(a), list(b)
    i = j = 0
    while i < m and j < k:
        x = min(ra[i], rb[j])
        flow[(i, j)] = x
        ra[i] -= x
        rb[j] -= x
        if ra[i] == 0 and i < m - 1:
            i += 1
        else:
            j += 1
    degenerate = 0
    max_iter = 50 * (m + k) * (m + k) + 1000
    for _ in range(max_iter):
        basis = sorted(flow)
        u, v = _tree_potentials(basis, m, k, cost)
        entering = None
        best = 0
        bland = degenerate > 2 * (m + k)
        for r in range(m):
            for c in range(k):
                if (r, c) in flow:
                    continue
                red = cost[r][c] - u[r] - v[c]
                if red < best:
                    entering, best = (r, c), red
                    if bland:
                        break
            if bland and entering is not None:
                break
        if entering is None:
            break
        r, c = entering
        path = _tree_path(basis, m, k, r, c)
        # the cycle is entering(+), then path cells alternating (-, +, ...) from column c back to row r
        cycle = [entering] + path[::-1]
        minus = cycle[1::2]
        theta = min(flow[cell] for cell in minus)
        leaving = min(cell for cell in minus if flow[cell] == theta)
        for idx, cell in enumerate(cycle):
            if idx == 0:
                continue
            flow[cell] += theta if idx % 2 == 0 else -theta
        flow[entering] = theta
        del flow[leaving]
        degenerate = degenerate + 1 if theta == 0 else 0
    else:
        raise ArithmeticError("transportation simplex did not converge")
    for (i, j), x in flow.items():
        if x > 0 and cint[i][j] is None:
            raise InfeasibleTransportError("every coupling puts mass on an infinite-cost pair")
    return sorted((i, j, x) for (i, j), x in flow.items() if x > 0)


def _prepare(P, Q, kind):
    c = cost_matrix(kind, P.atoms, Q.atoms)
    cint = _integer_costs(c)
    for i, row in enumerate(cint):
        if all(x is None for x in row) and P.weights[i] > 0:
            raise InfeasibleTransportError(f"source atom {i} has infinite cost to every target")
    for j in range(len(Q)):
        if all(row[j] is None for row in cint) and Q.weights[j] > 0:
            raise InfeasibleTransportError(f"target atom {j} has infinite cost from every source")
    return cint


def solve_discrete(P, Q, kind):
    """Exact optimal coupling of two discrete measures.

    Raises
    ------
    InfeasibleTransportError
        If no coupling avoids infinite-cost pairs.
    """
    cint = _prepare(P, Q, kind)
    a = _exact_weights(P.weights)
    b = _exact_weights(Q.weights)
    entries = _transportation_simplex(a, b, cint)
    return Coupling([(i, j, float(x)) for i, j, x in entries], _value(entries, cint))


def brute_force_solve(P, Q, kind):
    """Optimal assignment by enumerating permutations (uniform marginals, at most 8 atoms)."""
    n = len(P)
    if n != len(Q) or n > MAX_BRUTE_FORCE:
        raise ValueError(f"brute force needs equally many atoms, at most {MAX_BRUTE_FORCE}")
    if not (np.all(P.weights == P.weights[0]) and np.all(Q.weights == Q.weights[0])):
        raise ValueError("brute force needs uniform marginals")
    cint = _integer_costs(cost_matrix(kind, P.atoms, Q.atoms))
    best, best_perm = None, None
    for perm in itertools.permutations(range(n)):
        total = 0
        for i, j in enumerate(perm):
            if cint[i][j] is None:
                break
            total += cint[i][j]
        else:
            if best is None or total < best:
                best, best_perm = total, perm
    if best_perm is None:
        raise InfeasibleTransportError("every assignment uses an infinite-cost pair")
    w = _exact_weights(P.weights)
    entries = [(i, j, w[i]) for i, j in enumerate(best_perm)]
    return Coupling([(i, j, float(x)) for i, j, x in entries], _value(entries, cint))


def permutation_values(P, Q, kind):
    """Integer-scaled total cost of every permutation, keyed by permutation."""
    cint = _integer_costs(cost_matrix(kind, P.atoms, Q.atoms))
    out = {}
    for perm in itertools.permutations(range(len(P))):
        if all(cint[i][j] is not None for i, j in enumerate(perm)):
            out[perm] = sum(cint[i][j] for i, j in enumerate(perm)) / COST_SCALE
    return out


@dataclass
class MonotoneReport:
    ok: bool
    cycle: tuple = None
    gap: float = 0.0


def check_c_monotone(support, kind, max_m=5, tol=MONOTONE_TOL):
    """Exhaustive test of cyclical monotonicity over cycles of at most ``max_m`` pairs.

    ``support`` is a sequence of ``(x, y)`` pairs. A cycle ``i_1..i_m``
    violates the condition when ``sum c(x_k, y_k) > sum c(x_k, y_{k+1}) + tol``.
    """
    if not 1 <= max_m <= 5:
        raise ValueError("max_m must be between 1 and 5")
    if len(support) == 0:
        raise ValueError("support is empty")
    xs = np.array([np.asarray(x, dtype=float) for x, _ in support])
    ys = np.array([np.asarray(y, dtype=float) for _, y in support])
    c = cost_matrix(kind, xs, ys)
    # gain[a, b] = c(x_a, y_a) - c(x_a, y_b): positive sums around a cycle are violations
    with np.errstate(invalid="ignore"):
        gain = np.diag(c)[:, None] - c
    s = len(support)
    worst = MonotoneReport(ok=True)
    for m in range(2, min(max_m, s) + 1):
        for first in range(s):
            rest = [i for i in range(first + 1, s)]
            for tail in itertools.permutations(rest, m - 1):
                cyc = (first,) + tail
                g = sum(gain[cyc[t], cyc[(t + 1) % m]] for t in range(m))
                if g > tol and (worst.ok or g > worst.gap):
                    worst = MonotoneReport(ok=False, cycle=cyc, gap=float(g))
    return worst


def coupling_support(P, Q, coupling):
    return [(P.atoms[i], Q.atoms[j]) for i, j, _ in coupling.entries]


def change_of_measure(mu, h):
    """``pi_i = mu_i exp(h_i) / sum_j mu_j exp(h_j)`` with ``exp(-inf) = 0``."""
    mu = np.asarray(mu, dtype=float)
    h = np.asarray(h, dtype=float)
    if np.any(np.all(np.isneginf(h), axis=-1)):
        raise DomainError("tilt has every entry -inf")
    with np.errstate(divide="ignore"):
        logits = np.log(mu) + h
    top = np.max(logits, axis=-1, keepdims=True)
    if not np.all(np.isfinite(top)):
        raise DomainError("tilt puts all weight on stocks with zero market weight")
    w = np.exp(logits - top)
    return w / w.sum(axis=-1, keepdims=True)


def portfolio_from_coupling(selection):
    """Portfolio ``mu -> change_of_measure(mu, selection(mu))``.

    ``selection`` maps a market weight to its log-tilt target ``h``.
    """
    return PortfolioMap(
        lambda mu: change_of_measure(mu, apply_rowwise(selection, mu)), name="coupling"
    )


def atom_selection(P, Q, coupling, tol=1e-12):
    """Selection function that maps each source atom to its heaviest target.

    Points that are not source atoms raise :class:`DomainError`.
    """
    targets = [Q.atoms[coupling.target_of(i)] if coupling.target_of(i) is not None else None
               for i in range(len(P))]

    def select(mu):
        mu = np.asarray(mu, dtype=float)
        d = np.max(np.abs(P.atoms - mu), axis=1)
        i = int(np.argmin(d))
        if d[i] > tol or targets[i] is None:
            raise DomainError("portfolio is only defined on the source atoms")
        return targets[i]

    return select


def portfolio_from_exp_shift(phi_map):
    """Portfolio whose exponential coordinates are ``theta - phi(theta)``."""

    def pi(mu):
        theta = to_exponential(mu)
        return from_exponential(theta - apply_rowwise(phi_map, theta))

    return PortfolioMap(pi, name="exp_shift")


def exp_shift_tilt(phi_map):
    """Log-tilt ``h = (-phi(theta), 0)`` that reproduces :func:`portfolio_from_exp_shift`."""

    def h(mu):
        theta = to_exponential(mu)
        shift = apply_rowwise(phi_map, theta)
        return np.concatenate([-shift, np.zeros(shift.shape[:-1] + (1,))], axis=-1)

    return h


@dataclass
class EntropyQuadraticResult:
    zeta: DiscreteMeasure
    coupling: Coupling
    quadratic_value: float
    neg_entropy_value: float


def entropy_to_quadratic(P, Q):
    """Solve the relative-entropy problem through its quadratic reformulation.

    Source atoms ``p`` are replaced by ``zeta = -log p``; minimizing
    ``|zeta - q|**2`` has the same minimizers as the relative-entropy cost
    because the two differ by terms that depend on one marginal only.
    """
    if np.any(P.atoms <= 0):
        raise DomainError("source atoms need strictly positive coordinates")
    zeta = DiscreteMeasure(-np.log(P.atoms), P.weights)
    coupling = solve_discrete(zeta, Q, CostKind.QUADRATIC)
    cint = _integer_costs(cost_matrix(CostKind.NEG_ENTROPY, P.atoms, Q.atoms))
    a = _exact_weights(P.weights)
    b = _exact_weights(Q.weights)
    # recover exact masses so the entropy value uses the same arithmetic as solve_discrete
    exact = _transportation_simplex(a, b, _integer_costs(cost_matrix(CostKind.QUADRATIC, zeta.atoms, Q.atoms)))
    if any(cint[i][j] is None for i, j, _ in exact):
        raise InfeasibleTransportError("quadratic optimum uses an infinite relative-entropy pair")
    return EntropyQuadraticResult(
        zeta=zeta,
        coupling=coupling,
        quadratic_value=coupling.value,
        neg_entropy_value=_value(exact, cint),
    )


def _decode_atoms(rows):
    def num(x):
        if x is None:
            return -math.inf
        if isinstance(x, str):
            return float(x)
        return float(x)

    return np.array([[num(x) for x in row] for row in rows], dtype=float)


def _encode_atoms(atoms):
    return [[None if math.isinf(x) and x < 0 else float(x) for x in row] for row in atoms]


def measure_from_dict(d):
    try:
        atoms = _decode_atoms(d["atoms"])
        weights = d.get("weights")
    except (KeyError, TypeError, ValueError) as exc:
        raise DomainError(f"malformed measure: {exc}") from None
    if weights is None:
        return DiscreteMeasure.uniform(atoms)
    return DiscreteMeasure(atoms, weights)


def load_problem(path):
    """Read ``{"P": {...}, "Q": {...}, "cost": kind}``; ``null`` or ``"-inf"`` atoms mean ``-inf``."""
    with open(path) as fh:
        data = json.load(fh)
    try:
        return measure_from_dict(data["P"]), measure_from_dict(data["Q"]), _kind(data["cost"])
    except KeyError as exc:
        raise DomainError(f"problem file is missing {exc}") from None


def dump_problem(path, P, Q, kind):
    with open(path, "w") as fh:
        json.dump({"P": P.to_dict(), "Q": Q.to_dict(), "cost": _kind(kind).value}, fh, indent=2)


def write_coupling_tsv(path, coupling):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["i", "j", "mass"])
        for i, j, mass in coupling.entries:
            w.writerow([i, j, repr(float(mass))])


def read_coupling_tsv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh, delimiter="\t"))
    if rows and rows[0] == ["i", "j", "mass"]:
        rows = rows[1:]
    return [(int(i), int(j), float(m)) for i, j, m in rows]
