"""Interventional Gaussian models: simulation, MLE, BIC, the alpha vector and LP objectives."""
from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import threading
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .graphs import Dag, IDag, UndirectedTree, graph_to_json_obj, intervention_node
from .imsets import CoordinateSystem, Subset, nonempty_subsets, subset
from .polytope import GluingTree

log = logging.getLogger(__name__)

COND_WARN = 1e10
MI_CLAMP = 1.0 - 1e-12


class DataError(ValueError):
    """Malformed or degenerate data (e.g. a singular marginal covariance)."""


# --- datasets --------------------------------------------------------------

@dataclass(frozen=True)
class Context:
    target: str | None
    data: np.ndarray


@dataclass(frozen=True)
class InterventionalDataset:
    """Context 0 is observational; every later context targets one variable."""

    variables: tuple[str, ...]
    contexts: tuple[Context, ...]
    _moments: tuple[np.ndarray, ...] = field(init=False, repr=False, compare=False)
    _alpha_cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False, compare=False)

    def __post_init__(self):
        variables = tuple(str(v) for v in self.variables)
        object.__setattr__(self, "variables", variables)
        if len(set(variables)) != len(variables):
            raise DataError("duplicate variable names")
        if not self.contexts:
            raise DataError("dataset has no contexts")
        if self.contexts[0].target is not None:
            raise DataError("context 0 must be observational")
        seen = set()
        ctxs = []
        for k, c in enumerate(self.contexts):
            data = np.asarray(c.data, dtype=float)
            if data.ndim != 2 or data.shape[1] != len(variables):
                raise DataError(f"context {k} data has shape {data.shape}, expected (n, {len(variables)})")
            if data.shape[0] < 1:
                raise DataError(f"context {k} is empty")
            if not np.isfinite(data).all():
                raise DataError(f"context {k} contains non-finite values")
            if k > 0:
                if c.target not in variables:
                    raise DataError(f"context {k} targets unknown variable {c.target!r}")
                if c.target in seen:
                    raise DataError(f"variable {c.target!r} is targeted twice")
                seen.add(c.target)
            data.setflags(write=False)
            ctxs.append(Context(c.target, data))
        object.__setattr__(self, "contexts", tuple(ctxs))
        object.__setattr__(self, "_moments", tuple(c.data.T @ c.data for c in ctxs))

    @property
    def p(self) -> int:
        return len(self.variables)

    @property
    def K(self) -> int:
        return len(self.contexts) - 1

    @property
    def sizes(self) -> list[int]:
        return [c.data.shape[0] for c in self.contexts]

    @property
    def n(self) -> int:
        return sum(self.sizes)

    @property
    def targets(self) -> list[str]:
        return [c.target for c in self.contexts[1:]]

    def index(self, labels: Iterable[str]) -> list[int]:
        pos = {v: i for i, v in enumerate(self.variables)}
        return [pos[v] for v in labels]

    def moment(self, k: int) -> np.ndarray:
        """Unnormalised second moment X_k^T X_k."""
        return self._moments[k]

    def contexts_targeting(self, v: str) -> frozenset[int]:
        return frozenset(k for k, c in enumerate(self.contexts) if k > 0 and c.target == v)

    def subset_contexts(self, keep: Sequence[int]) -> "InterventionalDataset":
        keep = sorted(set(keep) | {0})
        return InterventionalDataset(self.variables, tuple(self.contexts[k] for k in keep))

    def centered(self) -> "InterventionalDataset":
        return InterventionalDataset(
            self.variables,
            tuple(Context(c.target, c.data - c.data.mean(axis=0)) for c in self.contexts),
        )


def pooled_cov(ds: InterventionalDataset, contexts: Iterable[int]) -> np.ndarray:
    """Uncentered second moment pooled over the given contexts."""
    ks = sorted(set(contexts))
    if not ks:
        raise DataError("pooled covariance needs at least one context")
    total = sum(ds.sizes[k] for k in ks)
    return sum(ds.moment(k) for k in ks) / total


# --- parameters and simulation --------------------------------------------

@dataclass(frozen=True)
class GaussianParams:
    """Row i of ``lam`` holds the weights of the parents of variable i."""

    lam: np.ndarray
    omega: np.ndarray
    overrides: Mapping[int, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    def context(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        return self.overrides.get(k, (self.lam, self.omega))


def covariance_from_params(lam: np.ndarray, omega: np.ndarray) -> np.ndarray:
    p = lam.shape[0]
    inv = np.linalg.solve(np.eye(p) - lam, np.eye(p))
    sigma = inv @ np.diag(omega) @ inv.T
    return (sigma + sigma.T) / 2


def context_covariance(dag: Dag, params: GaussianParams, k: int) -> np.ndarray:
    lam, omega = params.context(k)
    for i in range(lam.shape[0]):
        for j in np.flatnonzero(lam[i]):
            if (dag.nodes[j], dag.nodes[i]) not in dag.arcs:
                raise DataError(f"weight {dag.nodes[j]}->{dag.nodes[i]} is not an arc")
    if (omega <= 0).any():
        raise DataError("error variances must be positive")
    return covariance_from_params(lam, omega)


def random_params(
    dag: Dag,
    targets: Sequence[str],
    rng: np.random.Generator,
    lam_range: tuple[float, float] = (0.25, 1.0),
    omega_range: tuple[float, float] = (0.5, 2.0),
) -> GaussianParams:
    """Edge weights uniform on +-lam_range and variances uniform on omega_range.

    Interventions are perfect: the target loses its incoming weights and gets a
    fresh variance.
    """
    p = len(dag.nodes)
    pos = {v: i for i, v in enumerate(dag.nodes)}
    lam = np.zeros((p, p))
    for t, h in dag.sorted_arcs():
        lam[pos[h], pos[t]] = rng.uniform(*lam_range) * rng.choice([-1.0, 1.0])
    omega = rng.uniform(*omega_range, size=p)
    overrides = {}
    for k, t in enumerate(targets, start=1):
        lk, ok = lam.copy(), omega.copy()
        i = pos[t]
        lk[i, :] = 0.0
        ok[i] = rng.uniform(*omega_range)
        overrides[k] = (lk, ok)
    return GaussianParams(lam, omega, overrides)


def simulate(dag: Dag, targets: Sequence[str], params: GaussianParams,
             sizes: Sequence[int], seed: int | np.random.Generator) -> InterventionalDataset:
    """Draw ``sizes[k]`` mean-zero Gaussian samples for each context."""
    targets = list(targets)
    if len(sizes) != len(targets) + 1:
        raise DataError("need one sample size per context")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    contexts = []
    for k, n_k in enumerate(sizes):
        if n_k < 1:
            raise DataError("sample sizes must be positive")
        sigma = context_covariance(dag, params, k)
        chol = np.linalg.cholesky(sigma)
        z = rng.standard_normal((n_k, len(dag.nodes)))
        contexts.append(Context(None if k == 0 else targets[k - 1], z @ chol.T))
    return InterventionalDataset(tuple(dag.nodes), tuple(contexts))


# --- alpha, MLE, BIC -------------------------------------------------------

def _logdet_pd(mat: np.ndarray, what: str) -> float:
    try:
        chol = np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        raise DataError(f"sample covariance of {what} is singular (not enough samples?)") from None
    diag = np.diag(chol)
    if diag.min() <= 0:
        raise DataError(f"sample covariance of {what} is singular")
    cond = (diag.max() / diag.min()) ** 2
    if cond > COND_WARN:
        warnings.warn(f"covariance of {what} is ill-conditioned (condition {cond:.3g})", RuntimeWarning)
    return 2.0 * float(np.log(diag).sum())


def _block(ds: InterventionalDataset, ks: Iterable[int], idx: list[int]) -> tuple[np.ndarray, int]:
    ks = list(ks)
    M = sum(ds.moment(k)[np.ix_(idx, idx)] for k in ks)
    return M, sum(ds.sizes[k] for k in ks)


def alpha(ds: InterventionalDataset, A: Iterable[str], Z: Iterable[int] = ()) -> float:
    """The alpha coordinate for variable set ``A`` and intervention indices ``Z``.

    The log-likelihood part uses the pooled moment over contexts outside ``Z``
    and the per-context moment inside ``Z``; the penalty carries log(n)/2.
    """
    A = subset(A)
    Z = frozenset(Z)
    key = (A, Z)
    cache = ds._alpha_cache
    if key in cache:
        return cache[key]
    if not A:
        val = 0.0
    else:
        bad = [k for k in Z if not 1 <= k <= ds.K]
        if bad:
            raise DataError(f"intervention indices {bad} out of range")
        idx = ds.index(A)
        what = "{" + ",".join(A) + "}"
        val = 0.0
        rest = [k for k in range(len(ds.contexts)) if k not in Z]
        groups = ([(rest, f"{what} pooled")] if rest else []) + [([k], f"{what} in context {k}") for k in sorted(Z)]
        for ks, label in groups:
            M, n_g = _block(ds, ks, idx)
            S = M / n_g
            logdet = _logdet_pd(S, label)
            quad = float(np.trace(np.linalg.solve(S, M)))
            val -= 0.5 * quad + 0.5 * n_g * logdet
        val -= 0.5 * math.log(ds.n) * (1 + len(Z)) * math.comb(len(A), 2)
    with ds._lock:
        cache.setdefault(key, val)
    return val


def _phi(P: np.ndarray, idx: list[int], p: int) -> np.ndarray:
    out = np.zeros((p, p))
    if idx:
        out[np.ix_(idx, idx)] = P
    return out


def _precision(ds: InterventionalDataset, ks: Iterable[int], labels: Iterable[str]) -> np.ndarray:
    idx = ds.index(sorted(labels, key=ds.variables.index))
    if not idx:
        return np.zeros((ds.p, ds.p))
    M, n_g = _block(ds, ks, idx)
    S = M / n_g
    _logdet_pd(S, "{" + ",".join(ds.variables[i] for i in idx) + "}")
    return _phi(np.linalg.inv(S), idx, ds.p)


def _check_dag(dag: Dag, ds: InterventionalDataset) -> None:
    if set(dag.nodes) != set(ds.variables):
        raise DataError("DAG nodes and dataset variables differ")


def mle_precisions(dag: Dag, ds: InterventionalDataset) -> list[np.ndarray]:
    """Maximum-likelihood precision matrix for every context."""
    _check_dag(dag, ds)
    out = []
    all_k = range(len(ds.contexts))
    for k in all_k:
        K = np.zeros((ds.p, ds.p))
        for i in dag.nodes:
            z_i = ds.contexts_targeting(i)
            ks = [k] if k in z_i else [j for j in all_k if j not in z_i]
            K += _precision(ds, ks, dag.family(i)) - _precision(ds, ks, dag.parents(i))
        out.append((K + K.T) / 2)
    return out


def n_parameters(dag: Dag, ds: InterventionalDataset) -> int:
    extra = sum(1 + len(dag.parents(t)) for t in ds.targets)
    return ds.p + len(dag.arcs) + extra


def bic_direct(dag: Dag, ds: InterventionalDataset) -> float:
    """Log-likelihood at the MLE minus (log n / 2) times the parameter count."""
    ll = 0.0
    for k, K in enumerate(mle_precisions(dag, ds)):
        n_k = ds.sizes[k]
        sign, logdet = np.linalg.slogdet(K)
        if sign <= 0:
            raise DataError(f"estimated precision for context {k} is not positive definite")
        ll += -0.5 * ds.p * n_k * math.log(2 * math.pi) + 0.5 * n_k * logdet - 0.5 * float(np.sum(K * ds.moment(k)))
    return ll - 0.5 * math.log(ds.n) * n_parameters(dag, ds)


def bic_constant(ds: InterventionalDataset) -> float:
    return -0.5 * ds.p * ds.n * math.log(2 * math.pi) - 0.5 * math.log(ds.n) * (ds.p + ds.K)


def bic_via_alpha(dag: Dag, ds: InterventionalDataset) -> float:
    """C plus the sum over nodes of alpha(family) minus alpha(parents)."""
    _check_dag(dag, ds)
    total = bic_constant(ds)
    for i in dag.nodes:
        z = ds.contexts_targeting(i)
        total += alpha(ds, dag.family(i), z) - alpha(ds, dag.parents(i), z)
    return total


def beta_transform(ds: InterventionalDataset, cap: int = 12) -> dict[Subset, float]:
    """Mobius transform of alpha over all subsets of variables and intervention nodes.

    Keys are subsets of the realized node set (targets appear as ``t_z``).
    """
    znodes = [intervention_node(t) for t in ds.targets]
    nodes = list(ds.variables) + znodes
    if len(nodes) > cap:
        raise DataError(f"{len(nodes)} nodes exceed the global transform cap {cap}")
    zidx = {z: k for k, z in enumerate(znodes, start=1)}
    a_val = {}
    for s in nonempty_subsets(nodes, 0):
        A = [v for v in s if v not in zidx]
        Z = [zidx[v] for v in s if v in zidx]
        a_val[subset(s)] = alpha(ds, A, Z)
    beta = {}
    for s in a_val:
        beta[s] = sum((-1) ** (len(s) - len(t)) * a_val[subset(t)] for t in nonempty_subsets(s, 0))
    return beta


# --- LP objective ----------------------------------------------------------

@dataclass(frozen=True)
class ObjectiveVector:
    coeffs: Mapping[Subset, float]
    constant: float

    def dense(self, coords: CoordinateSystem) -> list[float]:
        return [self.coeffs.get(s, 0.0) for s in coords.subsets]

    def value(self, ones: Iterable[Subset]) -> float:
        return self.constant + sum(self.coeffs.get(subset(s), 0.0) for s in ones)


def objective_vector(tree: UndirectedTree, ds: InterventionalDataset) -> ObjectiveVector:
    """Linear functional on star-subset coordinates reproducing the BIC on every vertex.

    Every context target must be a leaf of ``tree``.
    """
    if set(tree.nodes) != set(ds.variables):
        raise DataError("tree nodes and dataset variables differ")
    targets = ds.targets
    for t in targets:
        if tree.degree(t) != 1:
            raise DataError(f"target {t} is not a leaf of the tree")
    coeffs: dict[Subset, float] = {}
    const = bic_constant(ds)

    def f(v: str, R: Iterable[str], z: frozenset[int]) -> float:
        R = set(R)
        return alpha(ds, R | {v}, z) - alpha(ds, R, z)

    def mobius(v: str, Q: Subset, z: frozenset[int]) -> float:
        return sum((-1) ** (len(Q) - len(P)) * f(v, P, z) for P in nonempty_subsets(Q, 0))

    for v in tree.nodes:
        z = ds.contexts_targeting(v)
        nbrs = sorted(tree.neighbors(v))
        const += f(v, (), z)
        for Q in nonempty_subsets(nbrs, 2):
            m = mobius(v, Q, z)
            k = subset(Q + (v,))
            coeffs[k] = coeffs.get(k, 0.0) + m
    for u, w in tree.sorted_edges():
        zu, zw = ds.contexts_targeting(u), ds.contexts_targeting(w)
        m_u = mobius(u, (w,), zu)  # weight of w -> u
        m_w = mobius(w, (u,), zw)  # weight of u -> w
        if not zu and not zw:
            const += m_u
            continue
        # a targeted endpoint t is a leaf; x_{s,t,t_z} = 1 iff s -> t
        t, s, m_t, m_s = (u, w, m_u, m_w) if zu else (w, u, m_w, m_u)
        if zu and zw:
            raise DataError("both endpoints of an edge are targeted")
        const += m_s
        k = subset((s, t, intervention_node(t)))
        coeffs[k] = coeffs.get(k, 0.0) + (m_t - m_s)
    return ObjectiveVector(coeffs, const)


# --- mutual information and spanning trees --------------------------------

def mi_weights(ds: InterventionalDataset, pool: bool = False) -> np.ndarray:
    """Symmetric matrix of negative Gaussian mutual information estimates."""
    X = np.vstack([c.data for c in ds.contexts]) if pool else ds.contexts[0].data
    if X.shape[0] < 2:
        raise DataError("need at least two samples to estimate correlations")
    sd = X.std(axis=0)
    if (sd == 0).any():
        bad = [ds.variables[i] for i in np.flatnonzero(sd == 0)]
        raise DataError(f"constant columns: {bad}")
    r = np.corrcoef(X, rowvar=False)
    r = np.clip(r, -MI_CLAMP, MI_CLAMP)
    W = 0.5 * np.log1p(-r * r)
    np.fill_diagonal(W, 0.0)
    return (W + W.T) / 2


class _DisjointSet:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[max(ra, rb)] = min(ra, rb)
        return True


def kruskal_mst(weights: np.ndarray, labels: Sequence[str]) -> UndirectedTree:
    """Minimum spanning tree; ties go to the lexicographically first index pair."""
    p = len(labels)
    if p < 2:
        raise DataError("need at least two variables")
    W = np.asarray(weights, dtype=float)
    pairs = sorted(((W[i, j], i, j) for i, j in itertools.combinations(range(p), 2)))
    ds = _DisjointSet(p)
    edges = []
    for _, i, j in pairs:
        if ds.union(i, j):
            edges.append((labels[i], labels[j]))
            if len(edges) == p - 1:
                break
    return UndirectedTree(labels, edges)


# --- file formats ----------------------------------------------------------

def _read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric entry ({exc})") from None
    if data.size == 0:
        raise DataError(f"{path} has no data rows")
    if data.shape[1] != len(header):
        raise DataError(f"{path}: rows do not match the header width")
    return header, data


def load_manifest(path: str | Path) -> InterventionalDataset:
    """Read ``{"observational": csv, "interventions": [{"target", "path"}, ...]}``."""
    path = Path(path)
    try:
        man = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from None
    base = path.parent
    if "observational" not in man:
        raise DataError("manifest lacks an observational entry")
    header, obs = _read_csv(base / man["observational"])
    contexts = [Context(None, obs)]
    for entry in man.get("interventions", []):
        h, data = _read_csv(base / entry["path"])
        if set(h) != set(header):
            raise DataError(f"{entry['path']}: columns differ from the observational file")
        order = [h.index(v) for v in header]
        contexts.append(Context(str(entry["target"]), data[:, order]))
    return InterventionalDataset(tuple(header), tuple(contexts))


def save_dataset(ds: InterventionalDataset, directory: str | Path, fmt: str = "%.17g") -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    def write(name: str, data: np.ndarray) -> str:
        with open(directory / name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(ds.variables)
            for row in data:
                w.writerow([fmt % x for x in row])
        return name

    man = {"observational": write("context_0.csv", ds.contexts[0].data), "interventions": []}
    for k, c in enumerate(ds.contexts[1:], start=1):
        man["interventions"].append({"target": c.target, "path": write(f"context_{k}.csv", c.data)})
    out = directory / "manifest.json"
    out.write_text(json.dumps(man, indent=2) + "\n")
    return out


def truth_json(dag: Dag, targets: Sequence[str]) -> dict:
    return graph_to_json_obj(dag, targets)
