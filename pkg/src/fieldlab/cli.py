"""Batch front-end: parse a JSON run config, orchestrate
solve / verify / transfer / sweep pipelines, and emit CSV/JSON artifacts.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 invariant
violation.  All floating output is written with 17 significant digits so
reruns against an identical config and cache are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .cache import (CacheLock, cached_profiles, load_profile,
                    profile_cache_key, save_profile)
from .envelope import (build_envelope, default_p0, export_envelope_csv,
                       verify_lemma_21_22)
from .functionals import (energy_aux, energy_kt, energy_sf, grad_norm_sq,
                          integral_F, l2_norm_sq, nehari_residual,
                          pohozaev_residual, strong_residual)
from .nonlinearity import (ConfigError, KirchhoffFunction, Nonlinearity,
                           SamplingGrid, check_f_conditions,
                           check_m_conditions, make_affine_m, make_constant_m,
                           make_exp_m, make_power_m, make_power_nonlinearity,
                           make_tabulated_nonlinearity)
from .shooting import (IntegratorOptions, InvariantViolation, NumericalError,
                       solution_family)
from .transfer import multiplicity_sweep, solve_transfer

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INVARIANT = 4

TASKS = ("check", "solve", "envelope", "transfer", "sweep", "verify")


@dataclass
class RunConfig:
    dimension: int
    f: dict
    task: str
    M: Optional[dict] = None
    n_max: int = 5
    q_grid: Optional[np.ndarray] = None
    tolerances: dict = field(default_factory=dict)
    envelope: dict = field(default_factory=dict)
    cache_dir: Optional[str] = None
    out_dir: str = "out"

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        if self.dimension < 2:
            raise ConfigError("dimension must be at least 2")
        if self.n_max < 1:
            raise ConfigError("n_max must be at least 1")
        defaults = {"abs_tol": 1e-12, "rel_tol": 1e-10, "bisect_tol": 1e-13,
                    "max_step": None, "tail_match_rel": 1e-4}
        for k, v in self.tolerances.items():
            if k not in defaults:
                raise ConfigError(f"unknown tolerance {k!r}")
            if v is not None and (not isinstance(v, (int, float)) or v <= 0):
                raise ConfigError(f"tolerance {k} must be positive")
            defaults[k] = v
        self.tolerances = defaults
        env_defaults = {"p0": None, "t_max": None, "points": 20001}
        for k, v in self.envelope.items():
            if k not in env_defaults:
                raise ConfigError(f"unknown envelope option {k!r}")
            env_defaults[k] = v
        self.envelope = env_defaults
        if self.q_grid is not None:
            q = np.asarray(self.q_grid, dtype=np.float64)
            if q.ndim != 1 or len(q) == 0 or np.any(q <= 0) \
                    or np.any(np.diff(q) <= 0):
                raise ConfigError("q_grid must be positive and strictly increasing")
            self.q_grid = q

    @property
    def integrator_options(self) -> IntegratorOptions:
        t = self.tolerances
        return IntegratorOptions(abs_tol=t["abs_tol"], rel_tol=t["rel_tol"],
                                 max_step=t["max_step"],
                                 tail_match_rel=t["tail_match_rel"])

    def resolve_cache_dir(self) -> Path:
        env = os.environ.get("FIELDLAB_CACHE")
        if env:
            return Path(env)
        if self.cache_dir:
            return Path(self.cache_dir)
        return Path(self.out_dir) / "cache"


def config_from_dict(raw: dict, task: str) -> RunConfig:
    known = {"dimension", "f", "M", "n_max", "q_grid", "tolerances",
             "envelope", "cache_dir", "out_dir", "task"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "dimension" not in raw or "f" not in raw:
        raise ConfigError("config requires 'dimension' and 'f'")
    q_grid = raw.get("q_grid")
    if isinstance(q_grid, dict):
        unknown_q = set(q_grid) - {"lo", "hi", "count", "spacing"}
        if unknown_q:
            raise ConfigError(f"unknown q_grid keys: {sorted(unknown_q)}")
        lo, hi = q_grid.get("lo"), q_grid.get("hi")
        count = int(q_grid.get("count", 50))
        if not (isinstance(lo, (int, float)) and isinstance(hi, (int, float))
                and 0 < lo < hi and count >= 2):
            raise ConfigError("q_grid needs 0 < lo < hi and count >= 2")
        if q_grid.get("spacing", "log") == "log":
            q_grid = np.geomspace(lo, hi, count)
        else:
            q_grid = np.linspace(lo, hi, count)
    return RunConfig(
        dimension=int(raw["dimension"]),
        f=dict(raw["f"]),
        task=task,
        M=dict(raw["M"]) if raw.get("M") else None,
        n_max=int(raw.get("n_max", 5)),
        q_grid=q_grid,
        tolerances=dict(raw.get("tolerances") or {}),
        envelope=dict(raw.get("envelope") or {}),
        cache_dir=raw.get("cache_dir"),
        out_dir=str(raw.get("out_dir", "out")),
    )


def nonlinearity_from_config(cfg: RunConfig) -> Nonlinearity:
    d = cfg.f
    family = d.get("family")
    if family == "power":
        return make_power_nonlinearity(float(d["mu"]), float(d["p"]),
                                       cfg.dimension)
    if family == "tabulated":
        return make_tabulated_nonlinearity(
            d["t"], d["f"], cfg.dimension,
            omega=d.get("omega"), zeta=d.get("zeta"))
    raise ConfigError(f"unknown nonlinearity family {family!r}")


def m_from_descriptor(d: dict) -> KirchhoffFunction:
    family = d.get("family")
    if family == "constant":
        return make_constant_m(float(d.get("c", 1.0)))
    if family == "affine":
        return make_affine_m(float(d["a"]), float(d["b"]))
    if family == "power_m":
        return make_power_m(float(d.get("m0", 1.0)), float(d["q"]),
                            float(d.get("s", 1.0)))
    if family == "exp_m":
        return make_exp_m(float(d["q"]), float(d.get("m0", 1.0)))
    raise ConfigError(f"unknown M family {family!r}")


def m_generator_from_descriptor(d: dict):
    """Family over the swept weight: affine sweeps b, power_m and exp_m
    sweep q."""
    family = d.get("family")
    if family == "affine":
        a = float(d["a"])
        return lambda q: make_affine_m(a, q)
    if family == "power_m":
        m0, s = float(d.get("m0", 1.0)), float(d.get("s", 1.0))
        return lambda q: make_power_m(m0, q, s)
    if family == "exp_m":
        m0 = float(d.get("m0", 1.0))
        return lambda q: make_exp_m(q, m0)
    raise ConfigError(f"M family {family!r} has no sweep parameter")


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _report_payload(reports):
    return [{"condition_id": r.condition_id, "verdict": r.verdict,
             "evidence": [[t, v] for t, v in r.evidence],
             "message": r.message} for r in reports]


def _build_envelope(cfg: RunConfig, nl: Nonlinearity, profiles=None):
    p0 = cfg.envelope["p0"] or default_p0(cfg.dimension)
    t_max = cfg.envelope["t_max"]
    if t_max is None:
        t_max = 10.0 * nl.zeta
        if profiles:
            t_max = max(t_max, 1.25 * max(abs(p.shoot_height) for p in profiles))
    points = int(cfg.envelope["points"])
    return build_envelope(nl, float(p0), np.linspace(0.0, float(t_max), points))


def _solve_family(cfg: RunConfig, nl: Nonlinearity):
    """Load the family from cache when every member is present, otherwise
    solve afresh and populate the cache."""
    cache_dir = cfg.resolve_cache_dir()
    keys = [profile_cache_key(nl, cfg.dimension, n, cfg.tolerances)
            for n in range(cfg.n_max)]
    paths = [cache_dir / f"{k}.json" for k in keys]
    if all(p.is_file() for p in paths):
        profiles = [load_profile(p) for p in paths]
        gs = [grad_norm_sq(p) for p in profiles]
        if any(b <= a for a, b in zip(gs, gs[1:])):
            raise InvariantViolation("cached family violates the gradient ordering")
        return profiles
    profiles = solution_family(nl, cfg.dimension, cfg.n_max,
                               tol=cfg.tolerances["bisect_tol"],
                               opts=cfg.integrator_options)
    for key, u in zip(keys, profiles):
        save_profile(cache_dir, key, u, cfg.tolerances)
    return profiles


def _task_check(cfg: RunConfig, out: Path) -> int:
    nl = nonlinearity_from_config(cfg)
    payload = {"f": _report_payload(check_f_conditions(nl, SamplingGrid()))}
    if cfg.M is not None:
        kf = m_from_descriptor(cfg.M)
        payload["M"] = _report_payload(
            check_m_conditions(kf, cfg.dimension, SamplingGrid()))
    write_json(out / "check.json", payload)
    print(f"wrote {out / 'check.json'}")
    return EXIT_OK


def _task_solve(cfg: RunConfig, out: Path) -> int:
    nl = nonlinearity_from_config(cfg)
    kf = m_from_descriptor(cfg.M) if cfg.M else make_constant_m(1.0)
    with CacheLock(cfg.resolve_cache_dir()):
        profiles = _solve_family(cfg, nl)
    env = _build_envelope(cfg, nl, profiles)
    rows = []
    for i, u in enumerate(profiles, start=1):
        rows.append([
            i, u.node_count, u.shoot_height, grad_norm_sq(u), l2_norm_sq(u),
            integral_F(u), energy_sf(u), energy_kt(u, kf),
            energy_aux(u, env, kf.m0), pohozaev_residual(u),
            nehari_residual(u), strong_residual(u),
        ])
    write_csv(out / "solve.csv",
              ["n", "nodes", "s", "grad_norm_sq", "l2_norm_sq", "integral_F",
               "I", "J", "K", "pohozaev", "nehari", "strong_sup"], rows)
    print(f"wrote {out / 'solve.csv'} ({len(rows)} profiles)")
    return EXIT_OK


def _task_envelope(cfg: RunConfig, out: Path) -> int:
    nl = nonlinearity_from_config(cfg)
    env = _build_envelope(cfg, nl)
    export_envelope_csv(env, out / "envelope.csv")
    write_json(out / "lemmas.json",
               {"p0": env.p0, "delta": env.delta, "omega": env.omega,
                "reports": _report_payload(verify_lemma_21_22(env, nl))})
    print(f"wrote {out / 'envelope.csv'} and {out / 'lemmas.json'}")
    return EXIT_OK


def _task_transfer(cfg: RunConfig, out: Path) -> int:
    if cfg.M is None:
        raise ConfigError("transfer task needs an M descriptor")
    nl = nonlinearity_from_config(cfg)
    kf = m_from_descriptor(cfg.M)
    with CacheLock(cfg.resolve_cache_dir()):
        profiles = _solve_family(cfg, nl)
    rows = []
    payload = []
    for i, v in enumerate(profiles, start=1):
        res = solve_transfer(v, kf)
        payload.append({
            "n": i, "nodes": v.node_count, "s": v.shoot_height,
            "grad_norm_sq": res.grad_norm_sq_v, "roots": res.roots,
            "kirchhoff_grad_norms": res.kirchhoff_grad_norms,
            "diagnostics": res.diagnostics,
        })
        for t, kg, hres, sres, u in zip(res.roots, res.kirchhoff_grad_norms,
                                        res.diagnostics["h_residual"],
                                        res.diagnostics["strong_residual"],
                                        res.profiles):
            rows.append([i, v.node_count, v.shoot_height, t, hres, kg,
                         energy_kt(u, kf), sres])
    write_csv(out / "transfer.csv",
              ["n", "nodes", "s", "t", "h_residual", "kt_grad", "J",
               "strong_residual"], rows)
    write_json(out / "transfer.json", payload)
    print(f"wrote {out / 'transfer.csv'} ({len(rows)} roots)")
    return EXIT_OK


def _task_sweep(cfg: RunConfig, out: Path) -> int:
    if cfg.M is None or cfg.q_grid is None:
        raise ConfigError("sweep task needs an M descriptor and a q_grid")
    nl = nonlinearity_from_config(cfg)
    gen = m_generator_from_descriptor(cfg.M)
    with CacheLock(cfg.resolve_cache_dir()):
        profiles = _solve_family(cfg, nl)
    table = multiplicity_sweep(gen, profiles, cfg.q_grid)
    k_max = max((len(r.entries) for r in table.rows), default=0)
    header = ["q", "n_found"]
    for j in range(1, k_max + 1):
        header += [f"t_{j}", f"kt_grad_{j}", f"J_{j}"]
    header.append("flags")
    rows = []
    for r in table.rows:
        row = [r.q, r.count]
        for e in r.entries:
            row += [e.t, e.kt_grad, e.energy]
        row += [""] * (3 * (k_max - len(r.entries)))
        row.append(r.message or "ok")
        rows.append(row)
    write_csv(out / "sweep.csv", header, rows)
    print(f"wrote {out / 'sweep.csv'} ({len(rows)} q values)")
    if table.threshold_q_n is not None:
        kf0 = gen(float(cfg.q_grid[0]))
        gs = [grad_norm_sq(p) for p in profiles]
        args = (2.0 * kf0.m0) ** ((cfg.dimension - 2) / 2.0) * np.asarray(gs)
        write_json(out / "threshold.json", {
            "n": table.threshold_n,
            "q_n": table.threshold_q_n,
            "g_values": gs,
            "formula_inputs": {
                "m0": kf0.m0,
                "lambda_args": args.tolist(),
                "lambda_values": np.asarray(
                    kf0.decomposition.lam(args), dtype=float).tolist(),
            },
        })
        print(f"wrote {out / 'threshold.json'} (q_n = {table.threshold_q_n:.6g})")
    return EXIT_OK


def _task_verify(cfg: RunConfig, out: Path) -> int:
    cache_dir = cfg.resolve_cache_dir()
    violations = []
    count = 0
    with CacheLock(cache_dir):
        for path in cached_profiles(cache_dir):
            try:
                u = load_profile(path)
                u.norms.clear()
                poh = abs(pohozaev_residual(u))
                neh = abs(nehari_residual(u))
                strong = strong_residual(u)
                if poh >= 1e-5:
                    raise InvariantViolation(f"pohozaev residual {poh:.3e}")
                if neh >= 1e-5:
                    raise InvariantViolation(f"nehari residual {neh:.3e}")
                if strong >= 1e-5:
                    raise InvariantViolation(f"strong residual {strong:.3e}")
                i = len(u.radii) - 1
                ld_int = u.derivs[i] / u.values[i]
                ld_tail = float(u.tail.log_derivative(u.tail.match_radius))
                # the pure power-exponential model misses the Bessel
                # correction nu(nu-1)/(2 kappa^2 r^2); allow twice that
                nu = u.tail.algebraic_power
                allow = 1e-4 + nu * abs(nu - 1.0) / (
                    u.tail.decay_rate ** 2 * u.tail.match_radius ** 2)
                if abs(ld_int - ld_tail) > allow * abs(ld_tail):
                    raise InvariantViolation(
                        f"tail log-derivative off by {abs(ld_int - ld_tail):.3e}")
                count += 1
            except (InvariantViolation, ConfigError, ValueError) as exc:
                violations.append((path.name, str(exc)))
    for name, msg in violations:
        print(f"INVARIANT VIOLATION {name}: {msg}", file=sys.stderr)
    print(f"{count} profiles verified, {len(violations)} violations")
    return EXIT_INVARIANT if violations else EXIT_OK


def apply_overrides(raw: dict, assignments: list[str]) -> dict:
    for item in assignments:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, text = item.partition("=")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = raw
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot descend into {key!r}")
        node[parts[-1]] = value
    return raw


def run(cfg: RunConfig) -> int:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dispatch = {
        "check": _task_check,
        "solve": _task_solve,
        "envelope": _task_envelope,
        "transfer": _task_transfer,
        "sweep": _task_sweep,
        "verify": _task_verify,
    }
    return dispatch[cfg.task](cfg, out)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fieldlab",
        description="radial scalar-field / Kirchhoff transfer laboratory")
    parser.add_argument("task", choices=TASKS)
    parser.add_argument("--config", required=True, help="JSON run config")
    parser.add_argument("--set", dest="overrides", action="append",
                        default=[], metavar="KEY=VALUE",
                        help="dotted-path config override (JSON value)")
    parser.add_argument("--out", help="output directory (overrides config)")
    parser.add_argument("--version", action="version", version="fieldlab 0.1.0")
    args = parser.parse_args(argv)

    try:
        try:
            with open(args.config, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        raw = apply_overrides(raw, args.overrides)
        if args.out:
            raw["out_dir"] = args.out
        cfg = config_from_dict(raw, args.task)
        return run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
