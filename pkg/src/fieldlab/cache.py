"""JSON profile cache keyed by (nonlinearity descriptor, dimension, node
count, tolerances), plus a directory lock so concurrent runs cannot
interleave writes."""

from __future__ import annotations

import hashlib
import json
import math
import os
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .nonlinearity import (ConfigError, KernelSpec, Nonlinearity,
                           make_power_nonlinearity, _vector_F, _vector_f)
from .shooting import RadialProfile, TailModel

PROFILE_FORMAT = "fieldlab-profile-v1"


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def profile_cache_key(nl: Nonlinearity, n_dim: int, nodes: int,
                      tolerances: dict) -> str:
    payload = {
        "f": nl.descriptor,
        "n_dim": n_dim,
        "nodes": nodes,
        "tolerances": {k: tolerances[k] for k in sorted(tolerances)},
    }
    if nl.kernel.kind != kernels.F_POWER:
        digest = hashlib.sha256()
        for arr in (nl.kernel.params, nl.kernel.tab_t, nl.kernel.tab_a,
                    nl.kernel.tab_b):
            digest.update(np.ascontiguousarray(arr).tobytes())
        payload["f_tables_hash"] = digest.hexdigest()
    return hashlib.sha256(_canonical(payload).encode()).hexdigest()[:24]


def profile_to_dict(u: RadialProfile, tolerances: dict) -> dict:
    k = u.source_f.kernel
    return {
        "format": PROFILE_FORMAT,
        "tool_version": __version__,
        "dimension": u.dimension,
        "f": u.f_id,
        "f_meta": {
            "omega": u.source_f.omega,
            "zeta": u.source_f.zeta,
            # null encodes an unbounded growth exponent (strict JSON has
            # no Infinity literal)
            "growth_exponent": (u.source_f.growth_exponent
                                if math.isfinite(u.source_f.growth_exponent)
                                else None),
            "family": u.source_f.family,
        },
        "f_tables": {
            "kind": k.kind,
            "params": k.params.tolist(),
            "tab_t": k.tab_t.tolist(),
            "tab_a": k.tab_a.tolist(),
            "tab_b": k.tab_b.tolist(),
        },
        "shoot_height": u.shoot_height,
        "radii": u.radii.tolist(),
        "values": u.values.tolist(),
        "derivs": u.derivs.tolist(),
        "node_count": u.node_count,
        "tail": {
            "match_radius": u.tail.match_radius,
            "amplitude": u.tail.amplitude,
            "decay_rate": u.tail.decay_rate,
            "algebraic_power": u.tail.algebraic_power,
        },
        "integrator": dict(tolerances),
    }


def _nonlinearity_from_dict(d: dict) -> Nonlinearity:
    desc = d["f"]
    if desc.get("family") == "power":
        return make_power_nonlinearity(desc["mu"], desc["p"], desc["n_dim"])
    t = d["f_tables"]
    spec = KernelSpec(
        int(t["kind"]),
        np.asarray(t["params"], dtype=np.float64),
        np.asarray(t["tab_t"], dtype=np.float64),
        np.asarray(t["tab_a"], dtype=np.float64),
        np.asarray(t["tab_b"], dtype=np.float64),
    )
    meta = d["f_meta"]
    growth = meta["growth_exponent"]
    return Nonlinearity(
        f=lambda x, s=spec: _vector_f(s, x),
        F=lambda x, s=spec: _vector_F(s, x),
        omega=meta["omega"],
        zeta=meta["zeta"],
        growth_exponent=math.inf if growth is None else growth,
        family=meta["family"],
        descriptor=dict(desc),
        kernel=spec,
    )


def profile_from_dict(d: dict) -> RadialProfile:
    if d.get("format") != PROFILE_FORMAT:
        raise ConfigError(f"unknown profile format {d.get('format')!r}")
    tail = TailModel(**d["tail"])
    return RadialProfile(
        dimension=int(d["dimension"]),
        radii=np.asarray(d["radii"], dtype=np.float64),
        values=np.asarray(d["values"], dtype=np.float64),
        derivs=np.asarray(d["derivs"], dtype=np.float64),
        node_count=int(d["node_count"]),
        shoot_height=float(d["shoot_height"]),
        tail=tail,
        f_id=dict(d["f"]),
        source_f=_nonlinearity_from_dict(d),
    )


def save_profile(cache_dir, key: str, u: RadialProfile, tolerances: dict) -> Path:
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / f"{key}.json"
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(profile_to_dict(u, tolerances), allow_nan=False),
                   encoding="utf-8")
    os.replace(tmp, path)
    return path


def load_profile(path) -> RadialProfile:
    with open(path, encoding="utf-8") as fh:
        return profile_from_dict(json.load(fh))


def cached_profiles(cache_dir) -> list[Path]:
    cache_dir = Path(cache_dir)
    if not cache_dir.is_dir():
        return []
    return sorted(p for p in cache_dir.iterdir()
                  if p.suffix == ".json" and not p.name.startswith("."))


class CacheLock:
    """Exclusive lock file guarding one run per cache directory."""

    def __init__(self, cache_dir):
        self.path = Path(cache_dir) / ".lock"

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise ConfigError(
                f"cache directory is locked by another run ({self.path}); "
                "remove the stale lock file if no run is active") from None
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        return self

    def __exit__(self, *exc):
        try:
            self.path.unlink()
        except FileNotFoundError:
            pass
        return False
