"""End-to-end distinguishing runs and census tables.

An experiment builds one interferometer, computes the analytic no-click
probabilities, draws an exact and a cycle-truncated dataset of equal size and
runs the two-proportion test between them.  All artefacts embed the config
hash, the library versions and every seed.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numba
import numpy as np
import scipy

from . import __version__
from .bounds import DEFAULT_SIGMAS, bound_report
from .combinatorics import fraction_asymptotic_bound, fraction_exact, weighted_fraction_bound
from .errors import ValidationError
from .interferometer import InputSpec, Interferometer, balanced_port, fourier, haar_random
from .params import CutoffPolicy, NoiseParams
from .probability import lossy_subset_probability, subset_probability, truncated_subset_probability
from .samplers import _atomic_write, distinguish, estimate_subset_probability, sample_exact, sample_truncated

SCHEMA_VERSION = 1
WORKERS_ENV = "BOSONSIM_WORKERS"


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def versions() -> dict:
    return {"bosonsim": __version__, "numpy": np.__version__, "scipy": scipy.__version__, "numba": numba.__version__}


def parse_ports(text, dim: int) -> list[int]:
    """1-based port list such as ``"2..M"`` or ``"1,3,5..7"`` -> 0-based ports."""
    if isinstance(text, (list, tuple)):
        items = [str(x) for x in text]
    else:
        items = str(text).split(",")
    out = set()
    for item in items:
        item = item.strip()
        if not item:
            continue
        if ".." in item:
            lo, hi = item.split("..", 1)
            lo = dim if lo.strip().upper() == "M" else int(lo)
            hi = dim if hi.strip().upper() == "M" else int(hi)
            out.update(range(lo, hi + 1))
        else:
            out.add(dim if item.upper() == "M" else int(item))
    if not out or min(out) < 1 or max(out) > dim:
        raise ValidationError(f"port list {text!r} must be nonempty and within 1..{dim}")
    return sorted(p - 1 for p in out)


def build_interferometer(kind: str, dim: int, seed: Optional[int]) -> Interferometer:
    if kind == "haar":
        return haar_random(dim, _need_seed(seed))
    if kind == "fourier":
        return fourier(dim)
    if kind == "balanced":
        if dim < 2:
            raise ValidationError("balanced interferometers need dim >= 2")
        return balanced_port(haar_random(dim - 1, _need_seed(seed)))
    raise ValidationError(f"unknown interferometer kind {kind!r}")


def _need_seed(seed):
    if seed is None:
        raise ValidationError("a seed is required for random interferometers")
    return int(seed)


def _field(d: dict, path: str, key: str, kind, default=...):
    if key not in d:
        if default is ...:
            raise ValidationError(f"{path}.{key}: required field missing")
        return default
    value = d[key]
    if value is None and default is None:
        return None
    try:
        if kind is int and (isinstance(value, bool) or int(value) != value):
            raise TypeError
        return kind(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{path}.{key}: expected {kind.__name__}, got {value!r}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    dim: int
    kind: str
    n_bosons: int
    instance_seed: Optional[int]
    noise: NoiseParams
    cutoff: int
    subset: tuple
    samples: Optional[int]
    sigmas: float
    seed: int
    summary_path: str = "summary.json"
    table_path: str = "table.csv"
    write_datasets: bool = True
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ValidationError("config: expected a JSON object")
        version = d.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ValidationError(f"config.schema_version: unsupported version {version!r}")
        for section in ("instance", "noise", "cutoff", "run"):
            if not isinstance(d.get(section), dict):
                raise ValidationError(f"config.{section}: required object missing")
        inst, nz, cut, run = d["instance"], d["noise"], d["cutoff"], d["run"]
        dim = _field(inst, "config.instance", "dim", int)
        kind = _field(inst, "config.instance", "kind", str)
        n = _field(inst, "config.instance", "n_bosons", int)
        iseed = _field(inst, "config.instance", "seed", int, None)
        if dim < 1:
            raise ValidationError("config.instance.dim: must be >= 1")
        if not 1 <= n <= dim:
            raise ValidationError(f"config.instance.n_bosons: need 1 <= N <= M, got N={n}, M={dim}")
        if kind not in ("haar", "fourier", "balanced"):
            raise ValidationError(f"config.instance.kind: unknown kind {kind!r}")
        if kind != "fourier" and iseed is None:
            raise ValidationError("config.instance.seed: required for random interferometers")
        try:
            noise = NoiseParams(
                _field(nz, "config.noise", "xi", float, 1.0),
                _field(nz, "config.noise", "eta", float, 1.0),
                _field(nz, "config.noise", "nu", float, 0.0),
            )
        except ValidationError:
            raise
        except ValueError as exc:
            raise ValidationError(f"config.noise: {exc}") from None
        k = _field(cut, "config.cutoff", "k", int)
        if not 1 <= k <= n:
            raise ValidationError(f"config.cutoff.k: need 1 <= K <= N, got {k}")
        try:
            subset = tuple(parse_ports(d.get("subset", "2..M"), dim))
        except (ValueError, TypeError) as exc:
            raise ValidationError(f"config.subset: {exc}") from None
        samples = _field(run, "config.run", "samples", int, None)
        if samples is not None and samples < 1:
            raise ValidationError("config.run.samples: must be >= 1")
        sigmas = _field(run, "config.run", "sigmas", float, DEFAULT_SIGMAS)
        if not sigmas > 0:
            raise ValidationError("config.run.sigmas: must be positive")
        seed = _field(run, "config.run", "seed", int)
        return cls(
            dim=dim,
            kind=kind,
            n_bosons=n,
            instance_seed=iseed,
            noise=noise,
            cutoff=k,
            subset=subset,
            samples=samples,
            sigmas=sigmas,
            seed=seed,
            summary_path=_field(run, "config.run", "summary", str, "summary.json"),
            table_path=_field(run, "config.run", "table", str, "table.csv"),
            write_datasets=bool(run.get("datasets", True)),
            raw=d,
        )

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.raw, sort_keys=True).encode()).hexdigest()[:16]


def run_experiment(config: ExperimentConfig, out_dir=".", workers: Optional[int] = None) -> dict:
    """Run the distinguishing protocol and write summary, table and datasets into ``out_dir``.

    Returns the summary dict that was written.
    """
    workers = workers or default_workers()
    os.makedirs(out_dir, exist_ok=True)
    u = build_interferometer(config.kind, config.dim, config.instance_seed)
    inp = InputSpec(config.n_bosons, config.dim)
    noise = config.noise
    policy = CutoffPolicy(config.cutoff, noise.xi)
    omega = list(config.subset)
    rho = float(Fraction(config.n_bosons, config.dim))

    report = bound_report(noise, rho, config.cutoff, config.n_bosons, config.sigmas)
    samples = config.samples or report.sample_budget
    if noise.eta < 1.0 or noise.nu > 0.0:
        p_exact = lossy_subset_probability(u, inp, omega, noise).value
    else:
        p_exact = subset_probability(u, inp, omega, noise.xi).value
    p_trunc = truncated_subset_probability(u, inp, omega, policy).value

    seed_exact, seed_trunc = config.seed, config.seed + 1
    with ThreadPoolExecutor(max_workers=min(2, workers)) as pool:
        fut_a = pool.submit(sample_exact, u, inp, noise, samples, seed_exact)
        fut_b = pool.submit(sample_truncated, u, inp, policy, samples, seed_trunc)
        data_a, data_b = fut_a.result(), fut_b.result()
    result = distinguish(data_a, data_b, omega, config.sigmas)

    rows = []
    for label, data, analytic in (("exact", data_a, p_exact), ("truncated", data_b, p_trunc)):
        est, se = estimate_subset_probability(data, omega)
        rows.append({"model": label, "records": len(data), "seed": data.seed, "analytic": analytic, "estimate": est, "std_error": se})
        if config.write_datasets:
            data.write_jsonl(os.path.join(out_dir, f"dataset_{label}.jsonl"))
    _write_csv(os.path.join(out_dir, config.table_path), rows)

    body = {
        "config_hash": config.config_hash(),
        "config": config.raw,
        "versions": versions(),
        "seeds": {"instance": config.instance_seed, "exact": seed_exact, "truncated": seed_trunc},
        "instance_hash": u.instance_hash,
        "omega": [p + 1 for p in omega],
        "P_omega": p_exact,
        "P_omega_truncated_raw": p_trunc,
        "delta_P": p_exact - p_trunc,
        "bound": report.to_dict(),
        "samples": samples,
        "clamped_mass": data_b.metadata.get("clamped_mass", 0.0),
        "distinguisher": result.to_dict(),
    }
    body["summary_hash"] = hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:16]
    summary = dict(body, timestamp=_dt.datetime.now(_dt.timezone.utc).isoformat())
    _atomic_write(os.path.join(out_dir, config.summary_path), json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def _write_csv(path, rows: list[dict]):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    _atomic_write(path, buf.getvalue())


def census_rows(n_lo: int, n_hi: int, k: int, xi) -> list[dict]:
    """One row per ``N`` with the exact restricted fraction, its majorant and the weighted versions."""
    xi = Fraction(xi).limit_denominator(10**9) if isinstance(xi, float) else Fraction(xi)
    rows = []
    for n in range(n_lo, n_hi + 1):
        bound = fraction_asymptotic_bound(n, k)
        weighted = weighted_fraction_bound(n, k, xi)
        rows.append(
            {
                "N": n,
                "exact_fraction": float(fraction_exact(n, k)),
                "asymptotic_bound": bound.value,
                "weighted_ratio": float(weighted.exact_ratio) if weighted.exact_ratio is not None else "",
                "weighted_bound": weighted.majorant.value,
            }
        )
    return rows


def census_tables(n_range: tuple[int, int], k: int, xi, out) -> list[dict]:
    """Write the census CSV to ``out`` and return its rows."""
    lo, hi = n_range
    if lo < 1 or hi < lo:
        raise ValidationError(f"n-range must satisfy 1 <= a <= b, got {lo}..{hi}")
    rows = census_rows(lo, hi, k, xi)
    _write_csv(out, rows)
    return rows
