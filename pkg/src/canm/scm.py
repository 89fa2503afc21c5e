"""Confounded additive-noise simulator.

A model is a DAG over treatments, one structural function per treatment, an
outcome function over all treatments, and a single multivariate Gaussian
noise vector (U_1..U_n, U_Y) whose off-diagonal covariance is what makes the
model confounded. Sampling under arbitrary do-interventions and a Monte-Carlo
ground-truth effect oracle live here.

Models are immutable; sampling is a pure function of (model, targets, policy,
m, seed).
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .graph import Admg, Dag, topological_order
from .util import chol_factor, sample_mvn

PSD_EIG_FLOOR = -1e-9
SYM_TOL = 1e-12


def _norm_linear(linear):
    if linear is None:
        return ()
    items = linear.items() if hasattr(linear, "items") else linear
    out = {}
    for node, coeff in items:
        node = int(node)
        if node in out:
            raise UsageError(f"duplicate linear term for node {node}")
        out[node] = float(coeff)
    return tuple(sorted(out.items()))


def _norm_pairwise(pairwise):
    if pairwise is None:
        return ()
    items = pairwise.items() if hasattr(pairwise, "items") else [
        ((p, q), c) for p, q, c in pairwise
    ]
    out = {}
    for (p, q), coeff in items:
        p, q = sorted((int(p), int(q)))
        if p == q:
            raise UsageError(f"pairwise term must reference two distinct nodes, got ({p}, {q})")
        if (p, q) in out:
            raise UsageError(f"duplicate pairwise term for ({p}, {q})")
        out[(p, q)] = float(coeff)
    return tuple((p, q, c) for (p, q), c in sorted(out.items()))


@dataclass(frozen=True)
class StructuralFunction:
    """intercept + sum of linear terms + sum of pairwise product terms.

    ``linear`` maps parent -> coefficient, ``pairwise`` maps an unordered
    parent pair -> coefficient. Accepts dicts at construction and normalizes
    to sorted tuples so evaluation order (and hence float rounding) is fixed.
    """

    intercept: float = 0.0
    linear: tuple = ()
    pairwise: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "intercept", float(self.intercept))
        object.__setattr__(self, "linear", _norm_linear(self.linear))
        object.__setattr__(self, "pairwise", _norm_pairwise(self.pairwise))

    def referenced(self) -> frozenset:
        nodes = {p for p, _ in self.linear}
        for p, q, _ in self.pairwise:
            nodes.update((p, q))
        return frozenset(nodes)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Evaluate on a full treatment matrix of shape (m, n_treatments)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.full(x.shape[0], self.intercept)
        for p, c in self.linear:
            out = out + c * x[:, p]
        for p, q, c in self.pairwise:
            out = out + c * x[:, p] * x[:, q]
        return out

    def to_json(self) -> dict:
        return {
            "intercept": self.intercept,
            "linear": {str(p): c for p, c in self.linear},
            "pairwise": [[p, q, c] for p, q, c in self.pairwise],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "StructuralFunction":
        return cls(
            obj.get("intercept", 0.0),
            {int(k): v for k, v in obj.get("linear", {}).items()},
            [(int(p), int(q), float(c)) for p, q, c in obj.get("pairwise", [])],
        )


@dataclass(frozen=True)
class NoiseSpec:
    """Mean and covariance of the joint noise (U_1..U_n, U_Y)."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (len(mean), len(mean)):
            raise UsageError(f"cov shape {cov.shape} does not match mean length {len(mean)}")
        if np.max(np.abs(cov - cov.T)) > SYM_TOL:
            raise UsageError("noise covariance must be symmetric")
        eigmin = float(np.linalg.eigvalsh(cov)[0])
        if eigmin < PSD_EIG_FLOOR:
            raise UsageError(f"noise covariance is not PSD (min eigenvalue {eigmin:.3e})")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return len(self.mean)

    def factor(self) -> np.ndarray:
        # Cholesky with eigenvalue-clipped repair for near-PSD inputs; cached.
        cached = getattr(self, "_factor", None)
        if cached is None:
            cached = chol_factor(self.cov)
            object.__setattr__(self, "_factor", cached)
        return cached


@dataclass(frozen=True)
class ConfoundedAnm:
    """Treatment graph + structural functions + joint Gaussian noise.

    ``independent_flags[a]`` asserts that U_a is independent of every other
    noise term; the covariance row must then be zero off the diagonal.
    """

    graph: Dag
    f: tuple
    f_y: StructuralFunction
    noise: NoiseSpec
    independent_flags: tuple = ()

    def __post_init__(self):
        n = self.graph.n
        object.__setattr__(self, "f", tuple(self.f))
        if len(self.f) != n:
            raise UsageError(f"expected {n} treatment functions, got {len(self.f)}")
        flags = tuple(bool(v) for v in self.independent_flags) or (False,) * n
        if len(flags) != n:
            raise UsageError("independent_flags length must equal treatment count")
        object.__setattr__(self, "independent_flags", flags)
        if self.noise.dim != n + 1:
            raise UsageError(f"noise dimension must be n+1={n + 1}, got {self.noise.dim}")
        pa = self.graph.parent_sets()
        for i, fn in enumerate(self.f):
            extra = fn.referenced() - pa[i]
            if extra:
                raise UsageError(f"f_{i} references non-parents {sorted(extra)}")
        if self.f_y.referenced() - frozenset(range(n)):
            raise UsageError("outcome function references unknown treatments")
        for a, flag in enumerate(flags):
            if flag:
                row = np.delete(self.noise.cov[a], a)
                if np.max(np.abs(row)) > SYM_TOL:
                    raise UsageError(
                        f"treatment {a} flagged independent but noise row correlates"
                    )

    @property
    def n(self) -> int:
        return self.graph.n

    def topo(self) -> list:
        cached = getattr(self, "_topo", None)
        if cached is None:
            cached = topological_order(self.graph)
            object.__setattr__(self, "_topo", cached)
        return cached


@dataclass(frozen=True)
class InterventionalDataset:
    """Sample matrix (columns X1..Xn, Y) plus the regime that generated it."""

    targets: frozenset
    value_policy: str
    data: np.ndarray
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "targets", frozenset(int(t) for t in self.targets))
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2 or data.shape[1] < 2:
            raise UsageError("dataset must be a 2-d matrix with at least X1 and Y columns")
        if data.size and not np.all(np.isfinite(data)):
            raise UsageError("dataset contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def m(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1] - 1

    def x(self, i: int) -> np.ndarray:
        return self.data[:, i]

    def treatments(self) -> np.ndarray:
        return self.data[:, : self.n]

    def y(self) -> np.ndarray:
        return self.data[:, self.n]


@dataclass(frozen=True)
class AceEstimate:
    """Point estimate of E[Y|do(...)] with its Monte-Carlo standard error."""

    value: float
    stderr: float


def parse_targets(spec, n: int) -> frozenset:
    """Accept 'all', an iterable of indices, or a comma string like '0,2'."""
    if spec is None:
        return frozenset()
    if isinstance(spec, str):
        text = spec.strip()
        if text in ("", "none"):
            return frozenset()
        if text == "all":
            return frozenset(range(n))
        spec = [int(tok) for tok in text.split(",")]
    targets = frozenset(int(t) for t in spec)
    if any(t < 0 or t >= n for t in targets):
        raise UsageError(f"target out of range for n={n}")
    return targets


def _policy_values(policy: str, targets_sorted, m: int, rng: np.random.Generator) -> np.ndarray:
    if policy == "std_normal":
        return rng.standard_normal((m, len(targets_sorted)))
    if policy.startswith("fixed:"):
        vals = [float(tok) for tok in policy[len("fixed:"):].split(",") if tok != ""]
        if len(vals) != len(targets_sorted):
            raise UsageError(
                f"fixed policy supplies {len(vals)} values for {len(targets_sorted)} targets"
            )
        return np.tile(np.asarray(vals, dtype=float), (m, 1))
    if policy.startswith("uniform:"):
        lo, hi = (float(tok) for tok in policy[len("uniform:"):].split(","))
        return rng.uniform(lo, hi, size=(m, len(targets_sorted)))
    raise UsageError(f"unknown value policy {policy!r}")


def sample(anm: ConfoundedAnm, targets, value_policy: str = "std_normal",
           m: int = 1000, seed: int = 0) -> InterventionalDataset:
    """Draw m i.i.d. rows under do(targets) with target values set per policy.

    Non-intervened treatments are evaluated in topological order as
    f_i(parents) + U_i; the outcome is f_Y(X) + U_Y. Bitwise deterministic
    for a fixed seed.
    """
    n = anm.n
    targets = parse_targets(targets, n)
    if m < 1:
        raise UsageError("m must be >= 1")
    rng = np.random.default_rng(seed)
    u = sample_mvn(rng, anm.noise.mean, anm.noise.factor(), m)
    tsort = sorted(targets)
    drawn = _policy_values(value_policy, tsort, m, rng)
    vals = np.zeros((m, n + 1))
    col = {t: k for k, t in enumerate(tsort)}
    for node in anm.topo():
        if node in targets:
            vals[:, node] = drawn[:, col[node]]
        else:
            vals[:, node] = anm.f[node].evaluate(vals[:, :n]) + u[:, node]
    vals[:, n] = anm.f_y.evaluate(vals[:, :n]) + u[:, n]
    return InterventionalDataset(targets, value_policy, vals, seed)


def anm_sampler(anm: ConfoundedAnm, value_policy: str = "std_normal"):
    """Sampler closure with the (targets, m, seed) -> dataset signature the
    discovery routines expect."""

    def draw(targets, m, seed):
        return sample(anm, targets, value_policy, m, seed)

    return draw


def true_ace_oracle(anm: ConfoundedAnm, w_targets, w_values, m_mc: int = 100_000,
                    seed: int = 0) -> AceEstimate:
    """Ground-truth Monte-Carlo mean of Y under do(w_targets = w_values)."""
    if m_mc < 1:
        raise UsageError("m_mc must be >= 1")
    targets = parse_targets(w_targets, anm.n)
    w_values = np.asarray(w_values, dtype=float).reshape(-1)
    if len(w_values) != len(targets):
        raise UsageError("value count does not match target count")
    policy = "fixed:" + ",".join(repr(float(v)) for v in w_values) if targets else "std_normal"
    ds = sample(anm, targets, policy, m_mc, seed)
    y = ds.y()
    se = float(y.std(ddof=1) / np.sqrt(m_mc)) if m_mc > 1 else 0.0
    return AceEstimate(float(y.mean()), se)


def observable_admg(anm: ConfoundedAnm, tol: float = 1e-9) -> Admg:
    """Treatment graph plus bidirected edges wherever noise terms covary."""
    n = anm.n
    pairs = {
        (i, j)
        for i in range(n)
        for j in range(i + 1, n)
        if abs(anm.noise.cov[i, j]) > tol
    }
    return Admg(anm.graph, frozenset(pairs))


def _random_coeff(rng: np.random.Generator) -> float:
    # bounded away from zero so generated models stay faithful
    return float(rng.uniform(0.25, 1.0) * rng.choice((-1.0, 1.0)))


def random_anm(graph: Dag, seed: int = 0, pairwise_prob_y: float = 0.0,
               noise_correlation: float = 0.6, mean_scale: float = 0.5) -> ConfoundedAnm:
    """Random confounded model on a given graph.

    Treatment equations are linear in their parents; the outcome equation is
    linear in all treatments with optional pairwise product terms. The noise
    covariance has unit diagonal and dense correlations scaled by
    ``noise_correlation``.
    """
    n = graph.n
    rng = np.random.default_rng(seed)
    pa = graph.parent_sets()
    f = tuple(
        StructuralFunction(
            float(rng.uniform(-mean_scale, mean_scale)),
            {p: _random_coeff(rng) for p in sorted(pa[i])},
        )
        for i in range(n)
    )
    pair_terms = {
        (p, q): _random_coeff(rng)
        for p in range(n)
        for q in range(p + 1, n)
        if rng.random() < pairwise_prob_y
    }
    f_y = StructuralFunction(
        float(rng.uniform(-mean_scale, mean_scale)),
        {i: _random_coeff(rng) for i in range(n)},
        pair_terms,
    )
    g = rng.standard_normal((n + 1, n + 1))
    corr = g @ g.T / (n + 1)
    d = np.sqrt(np.diag(corr))
    corr = corr / np.outer(d, d)
    cov = (1.0 - noise_correlation) * np.eye(n + 1) + noise_correlation * corr
    mean = rng.uniform(-mean_scale, mean_scale, n + 1)
    return ConfoundedAnm(graph, f, f_y, NoiseSpec(mean, cov))


def anm_to_json(anm: ConfoundedAnm) -> dict:
    return {
        "graph": anm.graph.to_json(),
        "functions": [fn.to_json() for fn in anm.f],
        "outcome_function": anm.f_y.to_json(),
        "noise_mean": anm.noise.mean.tolist(),
        "noise_cov": anm.noise.cov.tolist(),
        "independent_flags": list(anm.independent_flags),
    }


def anm_from_json(obj: dict) -> ConfoundedAnm:
    try:
        return ConfoundedAnm(
            Dag.from_json(obj["graph"]),
            tuple(StructuralFunction.from_json(fn) for fn in obj["functions"]),
            StructuralFunction.from_json(obj["outcome_function"]),
            NoiseSpec(np.asarray(obj["noise_mean"]), np.asarray(obj["noise_cov"])),
            tuple(bool(v) for v in obj.get("independent_flags", [])),
        )
    except KeyError as exc:
        raise UsageError(f"malformed model JSON: missing {exc}") from exc


def save_anm(anm: ConfoundedAnm, path) -> None:
    with open(path, "w") as fh:
        json.dump(anm_to_json(anm), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_anm(path) -> ConfoundedAnm:
    with open(path) as fh:
        return anm_from_json(json.load(fh))


def dataset_csv_text(ds: InterventionalDataset) -> str:
    header = ",".join([f"X{i + 1}" for i in range(ds.n)] + ["Y"])
    lines = [header]
    for row in ds.data:
        lines.append(",".join(f"{v:.17g}" for v in row))
    return "\n".join(lines) + "\n"


def save_dataset(ds: InterventionalDataset, csv_path, meta_path=None) -> None:
    """CSV (header X1..Xn,Y) plus a JSON sidecar describing the regime."""
    csv_path = str(csv_path)
    if meta_path is None:
        base = csv_path[:-4] if csv_path.endswith(".csv") else csv_path
        meta_path = base + ".meta.json"
    with open(csv_path, "w") as fh:
        fh.write(dataset_csv_text(ds))
    meta = {
        "targets": sorted(ds.targets),
        "policy": ds.value_policy,
        "seed": int(ds.seed),
        "m": int(ds.m),
    }
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_dataset(csv_path, meta_path=None) -> InterventionalDataset:
    csv_path = str(csv_path)
    if meta_path is None:
        base = csv_path[:-4] if csv_path.endswith(".csv") else csv_path
        meta_path = base + ".meta.json"
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    with open(meta_path) as fh:
        meta = json.load(fh)
    return InterventionalDataset(
        frozenset(meta["targets"]), meta["policy"], data, int(meta["seed"])
    )
