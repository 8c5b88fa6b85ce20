"""Relative value of portfolios along market paths, and cycle tests.

A market path is an array of shape ``(T+1, n)`` of open-simplex points. A
cycle is a path whose last point equals its first. The value of a
portfolio relative to the market over one step is the multiplier
``1 + <pi(mu)/mu, mu' - mu>``; a cycle whose multipliers multiply to less
than one is a witness that the portfolio is not functionally generated.
"""

import csv
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .exceptions import DomainError, InvalidGeneratorError, NumericDegeneracyError
from .generators import l_divergence
from .simplex import from_exponential, psi, tangent_basis
from .validation import check_cycle, check_path

VIOLATION_TOL = 1e-9
# increments of the drift process smaller than this in magnitude are rounding noise
DRIFT_NOISE = 1e-12


def _step_returns(pi, path):
    """``<pi(mu_t)/mu_t, mu_{t+1} - mu_t>`` for every step, vectorized over leading axes."""
    start = path[..., :-1, :]
    ratio = pi(start) / start
    return np.sum(ratio * (path[..., 1:, :] - start), axis=-1)


def relative_value(pi, path, log=False):
    """Value ``V(t)`` of ``pi`` relative to the market, with ``V(0) = 1``.

    Parameters
    ----------
    pi : PortfolioMap or callable
    path : array_like, shape (T+1, n)
    log : bool
        Return ``log V(t)`` instead, which is more accurate for long paths.

    Raises
    ------
    NumericDegeneracyError
        If some one-step multiplier is nonpositive.
    """
    path = check_path(path)
    r = _step_returns(pi, path)
    if np.any(r <= -1.0):
        t = int(np.argmax(r <= -1.0))
        raise NumericDegeneracyError(f"nonpositive value multiplier at step {t}")
    logv = np.concatenate([[0.0], np.cumsum(np.log1p(r))])
    return logv if log else np.exp(logv)


@dataclass
class ValueDecomposition:
    """``logV[t] = phi_term[t] + drift[t]`` along a path (all in nats)."""

    logV: np.ndarray
    phi_term: np.ndarray
    drift: np.ndarray

    @property
    def residual(self):
        return self.logV - self.phi_term - self.drift


def fernholz_decompose(phi, path):
    """Split the log relative value of the portfolio generated by ``phi``.

    ``phi_term`` is ``log Phi(mu_t) - log Phi(mu_0)`` and ``drift`` is the
    running sum of L-divergences between consecutive points.
    """
    path = check_path(path)
    pi = phi.portfolio(path)
    start = path[:-1]
    r = np.sum(pi[:-1] / start * (path[1:] - start), axis=-1)
    if np.any(r <= -1.0):
        raise NumericDegeneracyError("nonpositive value multiplier along the path")
    logv = np.concatenate([[0.0], np.cumsum(np.log1p(r))])
    logphi = phi.log_value(path)
    phi_term = logphi - logphi[0]
    incr = l_divergence(phi, path[1:], start, pi=pi[:-1])
    if np.any(incr < -DRIFT_NOISE):
        raise InvalidGeneratorError(
            f"negative L-divergence {float(incr.min()):.3g}; generator is not concave"
        )
    incr = np.maximum(incr, 0.0)
    drift = np.concatenate([[0.0], np.cumsum(incr)])
    return ValueDecomposition(logV=logv, phi_term=phi_term, drift=drift)


def cycle_log_value(pi, cycle):
    """Log of the product of one-step multipliers around a closed cycle.

    Returns ``-inf`` when some multiplier is nonpositive. A value below
    ``-1e-9`` is a witness against multiplicative cyclical monotonicity.
    """
    cycle = check_cycle(cycle)
    return float(_cycle_log_values(pi, cycle[None])[0])


def _cycle_log_values(pi, cycles):
    """Batch version: ``cycles`` has shape (B, m+1, n) with closing point included."""
    r = _step_returns(pi, cycles)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.sum(np.log1p(np.maximum(r, -1.0)), axis=-1)
    out[np.any(r <= -1.0, axis=-1)] = -np.inf
    return out


def repeat_cycle(cycle, k):
    """Path that traverses ``cycle`` ``k`` times."""
    cycle = check_cycle(cycle)
    return np.concatenate([np.tile(cycle[:-1], (k, 1)), cycle[:1]])


class Box:
    """Axis-aligned box in weight space intersected with the open simplex.

    Parameters
    ----------
    lower, upper : array_like, shape (n,)
        Coordinate bounds. Sampling is by rejection: the first ``n-1``
        coordinates are drawn uniformly and the last is implied.
    """

    def __init__(self, lower, upper):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1 or self.lower.size < 2:
            raise ValueError("box bounds must be vectors of the same length >= 2")
        self.lower = np.maximum(self.lower, 0.0)
        self.upper = np.minimum(self.upper, 1.0)
        if (np.any(self.lower >= self.upper) or self.lower.sum() >= 1.0
                or self.upper.sum() <= 1.0):
            raise ValueError("region does not meet the open simplex")

    @property
    def n(self):
        return self.lower.size

    @classmethod
    def whole(cls, n):
        return cls(np.zeros(n), np.ones(n))

    @classmethod
    def around(cls, center, radius):
        """Cube of half-width ``radius`` around ``center``."""
        center = np.asarray(center, dtype=float)
        return cls(center - radius, center + radius)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lower) & (x <= self.upper) & (x > 0), axis=-1)

    def sample(self, rng, size):
        out = np.empty((0, self.n))
        for _ in range(1000):
            if out.shape[0] >= size:
                return out[:size]
            draws = max(2 * size, 64)
            head = rng.uniform(self.lower[:-1], self.upper[:-1], size=(draws, self.n - 1))
            x = np.concatenate([head, 1.0 - head.sum(axis=1, keepdims=True)], axis=1)
            out = np.concatenate([out, x[self.contains(x)]])
        if out.shape[0] == 0:
            raise ValueError("region is empty (rejection sampling found no point)")
        return out[np.arange(size) % out.shape[0]]

    def to_dict(self):
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}


def _region(region, n):
    if region is None:
        return Box.whole(n)
    if isinstance(region, dict):
        return Box(region["lower"], region["upper"])
    return region


@dataclass
class FuzzReport:
    min_log_value: float
    witness: np.ndarray = None
    trials: int = 0
    violations: int = 0
    by_length: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.witness is None


def _random_plane(rng, n, size):
    """Orthonormal pairs of tangent vectors, shape (size, 2, n)."""
    basis = tangent_basis(n)
    if n == 2:
        u = np.broadcast_to(basis[0], (size, n))
        return np.stack([u, u], axis=1)
    g = rng.standard_normal((size, 2, n - 1))
    a = g[:, 0] / np.linalg.norm(g[:, 0], axis=1, keepdims=True)
    b = g[:, 1] - np.sum(g[:, 1] * a, axis=1, keepdims=True) * a
    b /= np.linalg.norm(b, axis=1, keepdims=True)
    return np.stack([a @ basis, b @ basis], axis=1)


def _propose(rng, region, m, size, delta):
    """Candidate cycles of ``m`` distinct vertices (closing point not included).

    A third of the proposals are vertices in random order, a third are the
    same vertices sorted by angle around their centroid, and a third are
    jittered regular polygons. Orientation is random in every case.
    """
    n = region.n
    kind = rng.integers(0, 3, size=size)
    span = float(np.min(region.upper - region.lower))
    if delta is None:
        centre = region.sample(rng, size)
        pts = region.sample(rng, size * m).reshape(size, m, n)
        reach = 0.5 * span
    else:
        centre = region.sample(rng, size)
        reach = 0.5 * min(delta, span)
        basis = tangent_basis(n)
        dirs = rng.standard_normal((size, m, n - 1))
        dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
        rad = reach * rng.uniform(0, 1, (size, m, 1)) ** (1.0 / max(n - 1, 1))
        pts = centre[:, None, :] + (rad * dirs) @ basis
    plane = _random_plane(rng, n, size)
    # angle sort inside a random plane through the centroid
    rel = pts - pts.mean(axis=1, keepdims=True)
    ang = np.arctan2(np.einsum("bmn,bn->bm", rel, plane[:, 1]), np.einsum("bmn,bn->bm", rel, plane[:, 0]))
    order = np.argsort(ang, axis=1)
    sorted_pts = np.take_along_axis(pts, order[..., None], axis=1)
    # jittered regular polygons
    radius = reach * rng.uniform(0.05, 1.0, (size, 1, 1))
    phase = rng.uniform(0, 2 * np.pi, (size, 1))
    theta = phase + 2 * np.pi * np.arange(m)[None, :] / m
    poly = centre[:, None, :] + radius * (np.cos(theta)[..., None] * plane[:, None, 0]
                                          + np.sin(theta)[..., None] * plane[:, None, 1])
    poly += rng.normal(0, 0.05, poly.shape) * radius
    poly -= poly.mean(axis=-1, keepdims=True) - 1.0 / n
    out = np.where(kind[:, None, None] == 0, pts,
                   np.where(kind[:, None, None] == 1, sorted_pts, poly))
    flip = rng.random(size) < 0.5
    out[flip] = out[flip, ::-1]
    return out


def _close(cycles):
    return np.concatenate([cycles, cycles[:, :1]], axis=1)


def _valid(cycles, region, delta):
    ok = np.all(region.contains(cycles), axis=-1)
    ok &= np.all(np.abs(cycles.sum(axis=-1) - 1.0) < 1e-12, axis=-1)
    if delta is not None:
        jumps = np.linalg.norm(np.diff(_close(cycles), axis=1), axis=-1)
        ok &= np.all(jumps <= delta, axis=-1)
    return ok


def mcm_fuzz(pi, region=None, trials=10000, cycle_len=6, delta=None, seed=0, n=None, batch=2000):
    """Random search for cycles on which ``pi`` loses value against the market.

    Parameters
    ----------
    pi : PortfolioMap
    region : Box or dict, optional
        Where vertices are drawn; defaults to the whole simplex (``n`` needed).
    trials : int
        Number of cycles evaluated, spread evenly over lengths ``2..cycle_len``.
    cycle_len : int
        Largest number of distinct vertices in a cycle (at most 6).
    delta : float, optional
        Maximum Euclidean jump between consecutive vertices.

    Returns
    -------
    FuzzReport
        ``min_log_value`` over all trials and the first cycle (in trial
        order) whose log value is below ``-1e-9``, if any.
    """
    if region is None and n is None:
        raise ValueError("give either a region or the number of stocks n")
    region = _region(region, n)
    if not 2 <= cycle_len <= 6:
        raise ValueError("cycle_len must be between 2 and 6")
    if delta is not None and delta <= 0:
        raise ValueError("delta must be positive")
    rng = np.random.default_rng(seed)
    lengths = list(range(2, cycle_len + 1))
    quota = {m: trials // len(lengths) + (1 if i < trials % len(lengths) else 0)
             for i, m in enumerate(lengths)}
    report = FuzzReport(min_log_value=np.inf)
    for m in lengths:
        done = 0
        stalls = 0
        best_m = np.inf
        while done < quota[m]:
            cand = _propose(rng, region, m, batch, delta)
            cand = cand[_valid(cand, region, delta)][: quota[m] - done]
            if cand.shape[0] == 0:
                stalls += 1
                if stalls > 50:
                    raise ValueError("could not generate admissible cycles in the region")
                continue
            vals = _cycle_log_values(pi, _close(cand))
            done += cand.shape[0]
            best_m = min(best_m, float(vals.min()))
            bad = vals < -VIOLATION_TOL
            report.violations += int(bad.sum())
            if report.witness is None and bad.any():
                report.witness = _close(cand[np.argmax(bad)][None])[0]
        report.trials += done
        report.by_length[m] = best_m
        report.min_log_value = min(report.min_log_value, best_m)
    return report


def _tangent_moves(n):
    moves = []
    for i, j in combinations(range(n), 2):
        e = np.zeros(n)
        e[i], e[j] = 1.0, -1.0
        moves.extend([e, -e])
    return np.array(moves)


def find_violating_cycle(pi, region=None, budget=100000, seed=0, n=None, max_len=6,
                         restarts_per_round=8):
    """Deterministic search for a cycle with log value below ``-1e-9``.

    Random restarts (drawn like :func:`mcm_fuzz` proposals) are followed by
    coordinate-wise local improvement: each vertex is moved along the
    directions ``+-(e_i - e_j)`` with a shrinking step while the cycle log
    value decreases. ``budget`` bounds the number of cycle evaluations.

    Returns
    -------
    ndarray of shape (m+1, n) or None
    """
    if region is None and n is None:
        raise ValueError("give either a region or the number of stocks n")
    region = _region(region, n)
    n = region.n
    rng = np.random.default_rng(seed)
    moves = _tangent_moves(n)
    used = 0
    lengths = list(range(max(2, min(max_len, 6)), 1, -1))
    while used < budget:
        for m in lengths:
            cand = _propose(rng, region, m, 4 * restarts_per_round, None)
            cand = cand[_valid(cand, region, None)][:restarts_per_round]
            if cand.shape[0] == 0:
                continue
            vals = _cycle_log_values(pi, _close(cand))
            used += cand.shape[0]
            start = cand[np.argmin(vals)]
            cycle, val, used = _improve(pi, region, start, float(vals.min()), moves, used, budget)
            if val < -VIOLATION_TOL:
                return _close(cycle[None])[0]
            if used >= budget:
                return None
    return None


def _improve(pi, region, cycle, val, moves, used, budget, min_step=1e-7):
    step = 0.25 * float(np.min(region.upper - region.lower))
    m = cycle.shape[0]
    while step > min_step and used < budget:
        improved = False
        for k in range(m):
            trial = np.repeat(cycle[None], len(moves), axis=0)
            trial[:, k] += step * moves
            ok = _valid(trial, region, None)
            if not ok.any():
                continue
            trial = trial[ok]
            vals = _cycle_log_values(pi, _close(trial))
            used += trial.shape[0]
            best = int(np.argmin(vals))
            if vals[best] < val - 1e-15:
                cycle, val, improved = trial[best], float(vals[best]), True
            if used >= budget:
                break
        if val < -1e-6:
            break
        if not improved:
            step /= 2.0
    return cycle, val, used


def finite_mcm_potential(pi, atoms):
    """Test multiplicative cyclical monotonicity of ``pi`` on a finite set of points.

    Runs Bellman-Ford on the complete graph whose edge ``j -> k`` has length
    ``log(1 + <pi(x_j)/x_j, x_k - x_j>)``. Without a negative cycle the
    shortest distances from the first atom give ``log Phi`` at the atoms, and
    ``Phi(x) = min_j Phi(x_j) <pi(x_j)/x_j, x>`` is a concave generator that
    reproduces ``pi`` on the atoms.

    Returns
    -------
    (log_phi, cycle)
        ``log_phi`` is an array over atoms (or None) and ``cycle`` a violating
        closed cycle of atoms (or None).
    """
    atoms = check_path(atoms, min_length=1)
    k = atoms.shape[0]
    ratio = pi(atoms) / atoms
    mult = 1.0 + ratio @ atoms.T - np.sum(ratio * atoms, axis=1, keepdims=True)
    if np.any(mult <= 0):
        j, i = np.argwhere(mult <= 0)[0]
        return None, atoms[[j, i, j]]
    w = np.log(mult)
    np.fill_diagonal(w, 0.0)
    # relaxations smaller than this are rounding noise, not evidence of a cycle
    tol = VIOLATION_TOL / max(k, 1)
    dist = w[0].copy()
    dist[0] = 0.0
    pred = np.zeros(k, dtype=int)
    last = -1
    for _ in range(k):
        cand = dist[:, None] + w
        src = np.argmin(cand, axis=0)
        best = cand[src, np.arange(k)]
        upd = best < dist - tol
        if not upd.any():
            return dist, None
        dist = np.where(upd, best, dist)
        pred = np.where(upd, src, pred)
        last = int(np.argmax(upd))
    v = last
    for _ in range(k):
        v = int(pred[v])
    cyc = [v]
    u = int(pred[v])
    while u != v:
        cyc.append(u)
        u = int(pred[u])
    cyc.append(v)
    return None, atoms[cyc[::-1]]


def relative_value_exp(phi_map, theta_path, return_path=False):
    """Log relative value computed in exponential coordinates.

    ``phi_map`` maps a coordinate vector ``theta`` (length ``n-1``) to the
    shift ``phi(theta)``; the portfolio is ``from_exponential(theta - phi(theta))``.
    Uses ``log V(t) = psi(theta_0) - psi(theta_t)
    + sum_s [psi(theta_{s+1} - phi_s) - psi(theta_s - phi_s)]``.
    """
    theta = np.atleast_2d(np.asarray(theta_path, dtype=float))
    if not np.all(np.isfinite(theta)):
        raise DomainError("exponential coordinates must be finite")
    shift = np.array([np.atleast_1d(phi_map(t)) for t in theta[:-1]]).reshape(theta[:-1].shape)
    incr = psi(theta[1:] - shift) - psi(theta[:-1] - shift)
    series = psi(theta[0]) - psi(theta) + np.concatenate([[0.0], np.cumsum(incr)])
    return series if return_path else float(series[-1])


def exp_shift_portfolio_weights(phi_map, theta):
    """Weights of the portfolio with exponential-coordinate shift ``phi_map``."""
    theta = np.asarray(theta, dtype=float)
    return from_exponential(theta - np.asarray(phi_map(theta), dtype=float))


def read_path_csv(path):
    """Read a path written as CSV with header ``w1,...,wn``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DomainError(f"{path}: empty path file")
    header = [h.strip() for h in rows[0]]
    expected = [f"w{i + 1}" for i in range(len(header))]
    if header != expected:
        raise DomainError(f"{path}: header must be {','.join(expected)}")
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise DomainError(f"{path}: {exc}") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise DomainError(f"{path}: every row needs {len(header)} weights")
    return check_path(data)


def write_path_csv(path, points):
    points = np.asarray(points, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"w{i + 1}" for i in range(points.shape[1])])
        for row in points:
            w.writerow([repr(float(x)) for x in row])
