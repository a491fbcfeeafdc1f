"""Synthetic datasets from the exact and the lower-order (classical) models, and the no-click test.

Every sampler draws a fixed-width block of Philox uniforms per record, so
record ``i`` is a function of ``(seed, i)`` only and datasets are identical
whatever order or chunking is used to produce them.  Configurations are drawn
by inverse CDF over the enumeration order of
:func:`bosonsim.probability.configurations`.
"""

from __future__ import annotations

import enum
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm, poisson

from .errors import DegenerateDistributionError, InvalidArgumentError, SizeLimitError, ValidationError
from .interferometer import InputSpec, Interferometer, make_rng
from .params import CutoffPolicy, NoiseParams, check_xi
from .probability import (
    MAX_LOSSY_BOSONS,
    MAX_OUTCOMES,
    configurations,
    exact_probabilities,
    num_configurations,
    truncated_probabilities,
)

_CACHE: dict = {}
_CACHE_LIMIT = 4096


def _cached(key, compute):
    if key not in _CACHE:
        if len(_CACHE) >= _CACHE_LIMIT:
            _CACHE.clear()
        _CACHE[key] = compute()
    return _CACHE[key]


def clear_cache():
    _CACHE.clear()


class Verdict(str, enum.Enum):
    SEPARATED = "Separated"
    INCONCLUSIVE = "Inconclusive"


@dataclass(eq=False)
class SampleSet:
    """Output records of one model on one instance.

    ``model`` is a JSON-able dict with a ``"name"`` (``exact``, ``trunc`` or
    ``kinterf``) and the model parameters; ``records`` is an integer array of
    shape ``(count, dim)``.
    """

    model: dict
    records: np.ndarray
    seed: Optional[int]
    instance_hash: str = ""
    n_bosons: int = 0
    input_ports: tuple = ()
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.records = np.asarray(self.records, dtype=np.int64)
        if self.records.ndim != 2:
            raise ValidationError("records must be a 2-d array (count, dim)")
        if np.any(self.records < 0):
            raise ValidationError("occupations must be nonnegative")

    def __len__(self):
        return self.records.shape[0]

    @property
    def dim(self) -> int:
        return self.records.shape[1]

    def header(self) -> dict:
        return {
            "type": "header",
            "model": self.model,
            "seed": self.seed,
            "instance_hash": self.instance_hash,
            "n_bosons": self.n_bosons,
            "dim": self.dim,
            "input_ports": [p + 1 for p in self.input_ports],
            "metadata": self.metadata,
        }

    def write_jsonl(self, path):
        """Header line, then one ``{"m": [...]}`` line per record; written atomically."""
        lines = [json.dumps(self.header(), sort_keys=True)]
        lines.extend(json.dumps({"m": row}) for row in self.records.tolist())
        _atomic_write(path, "\n".join(lines) + "\n")

    @classmethod
    def read_jsonl(cls, path) -> "SampleSet":
        with open(path) as fh:
            first = fh.readline()
            try:
                head = json.loads(first)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}: bad header line: {exc}") from exc
            if head.get("type") != "header":
                raise ValidationError(f"{path}: first line must be a header record")
            rows = []
            for lineno, line in enumerate(fh, start=2):
                if not line.strip():
                    continue
                try:
                    rows.append(json.loads(line)["m"])
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise ValidationError(f"{path}:{lineno}: bad record: {exc}") from exc
        dim = int(head["dim"])
        records = np.array(rows, dtype=np.int64).reshape(len(rows), dim)
        return cls(
            model=head["model"],
            records=records,
            seed=head.get("seed"),
            instance_hash=head.get("instance_hash", ""),
            n_bosons=int(head.get("n_bosons", 0)),
            input_ports=tuple(p - 1 for p in head.get("input_ports", [])),
            metadata=head.get("metadata", {}),
        )


def _atomic_write(path, text: str):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _check_count(count) -> int:
    if int(count) != count or count < 1:
        raise InvalidArgumentError(f"count must be a positive integer, got {count}")
    return int(count)


def _uniforms(seed, count, width) -> np.ndarray:
    return make_rng(seed).random((count, width))


def _draw(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(cdf, u * cdf[-1], side="right")
    return np.minimum(idx, len(cdf) - 1)


def _exact_law(u: Interferometer, ports: tuple, xi: float):
    def compute():
        inp = InputSpec(len(ports), u.dim, ports)
        configs = configurations(len(ports), u.dim)
        p = exact_probabilities(u, inp, xi, configs)
        return configs, np.cumsum(np.clip(p, 0.0, None))

    return _cached(("exact", u.instance_hash, ports, xi), compute)


def _check_space(n, dim):
    if num_configurations(n, dim) > MAX_OUTCOMES:
        raise SizeLimitError(f"outcome space of N={n}, M={dim} exceeds {MAX_OUTCOMES} configurations")


def sample_exact(u: Interferometer, inp: InputSpec, noise: NoiseParams, count: int, seed: int) -> SampleSet:
    """Records from the exact noisy model: losses, then interference, then dark counts."""
    count = _check_count(count)
    n, dim = inp.n_bosons, inp.dim
    _check_space(n, dim)
    lossy = noise.eta < 1.0
    if lossy and n > MAX_LOSSY_BOSONS:
        raise SizeLimitError(f"lossy sampling is capped at N={MAX_LOSSY_BOSONS}")
    u01 = _uniforms(seed, count, n + 1 + dim)
    survive = u01[:, :n] < noise.eta**2
    codes = survive @ (1 << np.arange(n, dtype=np.int64))
    records = np.zeros((count, dim), dtype=np.int64)
    for code in np.unique(codes):
        rows = np.nonzero(codes == code)[0]
        ports = tuple(p for j, p in enumerate(inp.input_ports) if (code >> j) & 1)
        if not ports:
            continue
        configs, cdf = _exact_law(u, ports, noise.xi)
        records[rows] = configs[_draw(cdf, u01[rows, n])]
    if noise.nu > 0.0:
        records += np.maximum(poisson.ppf(u01[:, n + 1 :], noise.nu), 0).astype(np.int64)
    return SampleSet(
        model={"name": "exact", "xi": noise.xi, "eta": noise.eta, "nu": noise.nu},
        records=records,
        seed=int(seed),
        instance_hash=u.instance_hash,
        n_bosons=n,
        input_ports=inp.input_ports,
    )


def truncated_law(u: Interferometer, inp: InputSpec, policy: CutoffPolicy):
    """Enumerated, clamped and renormalized cycle-truncated law.

    Returns ``(configs, probs, clamped_mass, clamp_events)``; negative raw
    entries are set to zero and their total magnitude reported.
    """
    _check_space(inp.n_bosons, inp.dim)

    def compute():
        configs = configurations(inp.n_bosons, inp.dim)
        raw = truncated_probabilities(u, inp, policy, configs)
        neg = raw < 0
        clamped = np.where(neg, 0.0, raw)
        total = clamped.sum()
        if not total > 0.0:
            raise DegenerateDistributionError("truncated law has no positive mass")
        return configs, clamped / total, float(np.abs(raw[neg]).sum()), int(neg.sum())

    return _cached(("trunc", u.instance_hash, inp.input_ports, policy.k_max, policy.xi), compute)


def sample_truncated(u: Interferometer, inp: InputSpec, policy: CutoffPolicy, count: int, seed: int) -> SampleSet:
    """Records from the renormalized cycle-truncated law."""
    count = _check_count(count)
    configs, probs, clamped_mass, events = truncated_law(u, inp, policy)
    u01 = _uniforms(seed, count, 1)
    records = configs[_draw(np.cumsum(probs), u01[:, 0])]
    return SampleSet(
        model={"name": "trunc", "k": policy.k_max, "xi": policy.xi, "renormalized": True},
        records=records,
        seed=int(seed),
        instance_hash=u.instance_hash,
        n_bosons=inp.n_bosons,
        input_ports=inp.input_ports,
        metadata={"clamped_mass": clamped_mass, "clamp_events": events},
    )


def sample_k_interfering(u: Interferometer, inp: InputSpec, k: int, xi: float, count: int, seed: int) -> SampleSet:
    """``k`` uniformly chosen bosons interfere exactly; the other ``N - k`` route one by one."""
    count = _check_count(count)
    xi = check_xi(xi)
    n, dim = inp.n_bosons, inp.dim
    if int(k) != k or not 0 <= k <= n:
        raise InvalidArgumentError(f"k must be an integer in 0..N, got {k}")
    k = int(k)
    if k:
        _check_space(k, dim)
    u01 = _uniforms(seed, count, 2 * n + 1)
    order = np.argsort(u01[:, :n], axis=1, kind="stable")
    chosen = np.sort(order[:, :k], axis=1)
    lone = np.sort(order[:, k:], axis=1)
    records = np.zeros((count, dim), dtype=np.int64)
    ports = np.asarray(inp.input_ports)
    if k:
        codes = np.zeros(count, dtype=np.int64)
        for c in range(k):
            codes |= np.int64(1) << chosen[:, c]
        for code in np.unique(codes):
            rows = np.nonzero(codes == code)[0]
            sub = tuple(int(p) for j, p in enumerate(ports) if (code >> j) & 1)
            configs, cdf = _exact_law(u, sub, xi)
            records[rows] += configs[_draw(cdf, u01[rows, n])]
    # lone bosons: one uniform each, in ascending input order
    single_cdf = np.cumsum(np.abs(u.matrix) ** 2, axis=1)
    for c in range(n - k):
        src = ports[lone[:, c]]
        cdf_rows = single_cdf[src]
        target = (cdf_rows <= (u01[:, n + 1 + c] * cdf_rows[:, -1])[:, None]).sum(axis=1)
        target = np.minimum(target, dim - 1)
        np.add.at(records, (np.arange(count), target), 1)
    return SampleSet(
        model={"name": "kinterf", "k": k, "xi": xi},
        records=records,
        seed=int(seed),
        instance_hash=u.instance_hash,
        n_bosons=n,
        input_ports=inp.input_ports,
    )


def k_interfering_probabilities(u: Interferometer, inp: InputSpec, k: int, xi: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact law of :func:`sample_k_interfering` by enumeration (small instances)."""
    import itertools

    n, dim = inp.n_bosons, inp.dim
    configs = configurations(n, dim)
    index = {tuple(c): i for i, c in enumerate(configs.tolist())}
    probs = np.zeros(len(configs))
    single = np.abs(u.matrix) ** 2
    subsets = list(itertools.combinations(range(n), k))
    for chosen in subsets:
        sub_ports = tuple(inp.input_ports[j] for j in chosen)
        lone_ports = [inp.input_ports[j] for j in range(n) if j not in chosen]
        if k:
            kc = configurations(k, dim)
            kp = exact_probabilities(u, InputSpec(k, dim, sub_ports), xi, kc)
        else:
            kc, kp = np.zeros((1, dim), dtype=np.int64), np.ones(1)
        for targets in itertools.product(range(dim), repeat=len(lone_ports)):
            w = math.prod(single[src, t] for src, t in zip(lone_ports, targets))
            extra = np.zeros(dim, dtype=np.int64)
            for t in targets:
                extra[t] += 1
            for c, pc in zip(kc, kp):
                probs[index[tuple(c + extra)]] += pc * w / len(subsets)
    return configs, probs


# ---------------------------------------------------------------------------
# estimation and testing


def _omega_mask(omega: Sequence[int], dim: int) -> np.ndarray:
    ports = sorted(set(int(p) for p in omega))
    if not ports or ports[0] < 0 or ports[-1] >= dim:
        raise InvalidArgumentError(f"port subset must be nonempty and within 0..{dim - 1}")
    mask = np.zeros(dim, dtype=bool)
    mask[ports] = True
    return mask


def estimate_subset_probability(data: SampleSet, omega: Sequence[int]) -> tuple[float, float]:
    """Share of records with no counts outside ``omega``, with its binomial standard error."""
    if len(data) == 0:
        raise InvalidArgumentError("cannot estimate from an empty dataset")
    inside = _omega_mask(omega, data.dim)
    hits = ~np.any(data.records[:, ~inside] > 0, axis=1)
    p = float(hits.mean())
    return p, math.sqrt(p * (1.0 - p) / len(data))


@dataclass(frozen=True)
class DistinguisherResult:
    statistic: tuple[float, float]
    std_errors: tuple[float, float]
    z_score: float
    verdict: Verdict
    threshold_sigmas: float
    p_value: float

    def to_dict(self) -> dict:
        return {
            "statistic": list(self.statistic),
            "std_errors": list(self.std_errors),
            "z_score": self.z_score,
            "verdict": self.verdict.value,
            "threshold_sigmas": self.threshold_sigmas,
            "p_value": self.p_value,
        }


def distinguish(data_a: SampleSet, data_b: SampleSet, omega: Sequence[int], threshold_sigmas: float = 5.0) -> DistinguisherResult:
    """Pooled two-proportion z-test on the no-click statistic over ``omega``."""
    if len(data_a) == 0 or len(data_b) == 0:
        raise InvalidArgumentError("both datasets must be nonempty")
    if data_a.dim != data_b.dim:
        raise ValidationError("datasets have different port counts")
    pa, sa = estimate_subset_probability(data_a, omega)
    pb, sb = estimate_subset_probability(data_b, omega)
    na, nb = len(data_a), len(data_b)
    pooled = (pa * na + pb * nb) / (na + nb)
    denom = math.sqrt(pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb))
    if denom == 0.0:
        z = 0.0 if pa == pb else math.copysign(math.inf, pa - pb)
    else:
        z = (pa - pb) / denom
    verdict = Verdict.SEPARATED if abs(z) >= threshold_sigmas else Verdict.INCONCLUSIVE
    return DistinguisherResult((pa, pb), (sa, sb), z, verdict, float(threshold_sigmas), float(2 * norm.sf(abs(z))))
