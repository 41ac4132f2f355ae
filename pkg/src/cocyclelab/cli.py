"""Experiment runner: validated configs in, reproducible reports out.

Every randomized quantity is seeded from the config; re-running a config
byte-for-byte reproduces every numerical field of the report. Reports
embed the config text and its digest so witnesses can be replayed safely.
"""

from __future__ import annotations

import importlib.resources
import math
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np
import yaml

from . import base as basemod
from . import domination as dommod
from . import fixtures
from . import operator as opmod
from . import perturb as pertmod
from . import report as repmod
from . import spectrum as specmod
from .errors import CocycleLabError, ConfigError

TOOL_VERSION = "0.1.0"


# --------------------------------------------------------------------------
# config handling


def _require(cfg: dict, path: str, typ=None, default=None, required=True):
    node = cfg
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if required and default is None:
                raise ConfigError(f"missing config field: {path}")
            return default
        node = node[part]
    if typ is not None and not isinstance(node, typ):
        raise ConfigError(f"config field {path}: expected {typ}, got {type(node)}")
    return node


def load_config_text(ref: str) -> str:
    """Accept a filesystem path or a built-in scenario name."""
    p = Path(ref)
    if p.exists():
        return p.read_text()
    builtin = scenario_path(ref)
    if builtin is not None:
        return builtin.read_text()
    raise ConfigError(f"config not found: {ref!r} (not a file or scenario name)")


def scenario_path(name: str):
    root = importlib.resources.files("cocyclelab") / "scenarios"
    candidate = root / f"{name}.yaml"
    return candidate if candidate.is_file() else None


def list_scenario_names():
    root = importlib.resources.files("cocyclelab") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def build_system(cfg: dict) -> basemod.BaseSystem:
    kind = _require(cfg, "base.kind", str)
    if kind == "circle_rotation":
        angle = _require(cfg, "base.angle", required=False,
                         default=basemod.GOLDEN)
        return basemod.circle_rotation(float(angle))
    if kind == "torus_translation":
        a1 = _require(cfg, "base.angle1", required=False, default=basemod.GOLDEN)
        a2 = _require(cfg, "base.angle2", required=False,
                      default=math.sqrt(2.0) - 1.0)
        return basemod.torus_translation(float(a1), float(a2))
    if kind == "cat_map":
        return basemod.cat_map()
    raise ConfigError(f"base.kind: unknown system {kind!r}")


def load_table_grid(path: str):
    """Text grid file: header 'G M' or 'G1 G2 M', then blocks row-major."""
    lines = Path(path).read_text().split()
    head = [int(v) for v in lines[:3]]
    if len(lines) >= 3 and len(head) == 3 and \
            (len(lines) - 3) == head[0] * head[1] * head[2] * head[2]:
        g0, g1, m = head
        vals = np.array([float(v) for v in lines[3:]])
        return vals.reshape(g0, g1, m, m)
    g, m = int(lines[0]), int(lines[1])
    vals = np.array([float(v) for v in lines[2:]])
    if vals.size != g * m * m:
        raise ConfigError(f"table file {path}: expected {g * m * m} values, "
                          f"got {vals.size}")
    return vals.reshape(g, m, m)


def build_cocycle(cfg: dict) -> opmod.Cocycle:
    variant = _require(cfg, "cocycle.variant", str)
    M = int(_require(cfg, "cocycle.M", required=False, default=fixtures.DEFAULT_M))
    if variant == "example-2.8":
        return fixtures.example_block_diagonal(M)
    if variant == "scaled-center":
        eps = float(_require(cfg, "cocycle.epsilon"))
        return fixtures.scaled_center_cocycle(eps, M)
    if variant == "random-block":
        seed = int(_require(cfg, "cocycle.seed", required=False, default=0))
        cells = int(_require(cfg, "cocycle.cells", required=False, default=8))
        spread = float(_require(cfg, "cocycle.spread", required=False,
                                default=0.2))
        return fixtures.random_block_cocycle(seed, M=M, cells=cells,
                                             spread=spread)
    if variant == "table":
        path = _require(cfg, "cocycle.path", str)
        tail = opmod.tail_from_name(
            _require(cfg, "cocycle.tail", required=False, default="zero"))
        return opmod.TableCocycle(load_table_grid(path), tail)
    raise ConfigError(f"cocycle.variant: unknown variant {variant!r}")


def build_splitting(cfg: dict, M: int) -> opmod.SplittingSpec:
    d = int(_require(cfg, "splitting.d", required=False, default=1))
    c = int(_require(cfg, "splitting.c", required=False, default=1))
    return opmod.coordinate_splitting(M, d, c)


def _fixture_bundles(A, split):
    eye = np.eye(A.M)
    u = dommod.Bundle(eye[:, :split.d])
    c = dommod.Bundle(eye[:, split.d:split.D])
    s = dommod.Bundle(eye[:, split.D:], includes_tail=True)
    return u, c, s


def _build_bump(A, split, sys, params_cfg, seed):
    eps = float(params_cfg.get("epsilon", 0.1))
    r = float(params_cfg.get("r", 0.05))
    frac = float(params_cfg.get("inner_fraction", 0.9))
    delta = pertmod.delta_bound(A, split, eps, sys=sys, seed=seed)
    omega = params_cfg.get("omega")
    omega = float(omega) if omega is not None else \
        0.999 * pertmod.max_rotation_angle(delta)
    p = params_cfg.get("center")
    p = basemod.as_point(p) if p is not None else \
        pertmod.choose_center(sys, seed=seed)
    params = pertmod.PerturbationParams(p=p, r=r, inner_fraction=frac,
                                        omega=omega, delta=delta, epsilon=eps)
    B = pertmod.perturb_cu(A, split, params, sys)
    return B, params


def covariant_bundles(A, sys, split, spin: int = 150):
    """(E^u, E^c) bundles computed on demand by forward/backward pushes
    inside the invariant cu block; results cached per point."""
    cu = split.cu_at(np.zeros(2))
    d, D = split.d, split.D
    cache = {}

    def frames_at(x):
        x = basemod.as_point(x)
        key = tuple(np.round(x, 12))
        if key not in cache:
            q = np.eye(D)[:, :d]
            y = basemod.step(sys, x, -spin)
            for _ in range(spin):
                g = cu.T @ A.at(y).block @ cu
                q, r = np.linalg.qr(g @ q)
                q = q * np.sign(np.diag(r))
                y = basemod.step(sys, y, 1)
            w = np.eye(D)[:, d:]
            for j in range(spin - 1, -1, -1):
                g = cu.T @ A.at(basemod.step(sys, x, j)).block @ cu
                w, _ = np.linalg.qr(np.linalg.solve(g, w))
            cache[key] = (cu @ q, cu @ w)
        return cache[key]

    return (dommod.Bundle(lambda x: frames_at(x)[0]),
            dommod.Bundle(lambda x: frames_at(x)[1]))


# --------------------------------------------------------------------------
# operation handlers: cfg -> (results, verdicts, trace_rows)


def op_lyapunov_qr(cfg, sys, seed, threads):
    A = build_cocycle(cfg)
    p = cfg["operation"].get("params", {})
    n = int(p.get("horizon", 10_000))
    k = int(p.get("k", A.M))
    x0 = p.get("x0")
    x0 = basemod.as_point(x0) if x0 is not None else \
        basemod.sample_measure(sys, seed, 1)[0]
    run = specmod.lyapunov_qr(A, sys, x0, n, k)
    results = {"exponents": run.exponents, "horizon": n,
               "cauchy_gap": run.cauchy_gap}
    verdicts = {}
    if cfg["cocycle"]["variant"] == "example-2.8":
        expected = fixtures.example_exponents(A.M)[:k]
        err = float(np.max(np.abs(run.exponents - expected)))
        results["max_error_vs_exact"] = err
        verdicts["matches_exact_spectrum"] = err < 1e-9
    return results, verdicts, repmod.qr_trace_rows(run)


def op_entropy_dualpath(cfg, sys, seed, threads):
    A = build_cocycle(cfg)
    split = build_splitting(cfg, A.M)
    p = cfg["operation"].get("params", {})
    n = int(p.get("horizon", 100_000))
    x0 = basemod.sample_measure(sys, seed, 1)[0]
    ent_a = specmod.cu_entropy(A, sys, split, x0, n)
    B, params = _build_bump(A, split, sys, p, seed)
    ent_b = specmod.cu_entropy(B, sys, split, x0, n)
    results = {
        "constant": {"birkhoff": ent_a.birkhoff, "spectral": ent_a.spectral,
                     "discrepancy": ent_a.discrepancy},
        "rotation_bump": {"birkhoff": ent_b.birkhoff,
                          "spectral": ent_b.spectral,
                          "discrepancy": ent_b.discrepancy,
                          "omega": params.omega, "r": params.r},
        "horizon": n,
    }
    verdicts = {
        "constant_exact": ent_a.discrepancy < 1e-9,
        "bump_within_tolerance": ent_b.discrepancy < 1e-2,
        "entropy_conserved": abs(ent_a.birkhoff - ent_b.birkhoff) < 1e-2,
    }
    rows = [(n, "birkhoff_A", ent_a.birkhoff), (n, "spectral_A", ent_a.spectral),
            (n, "birkhoff_B", ent_b.birkhoff), (n, "spectral_B", ent_b.spectral)]
    return results, verdicts, rows


def op_domination_certify(cfg, sys, seed, threads):
    A = build_cocycle(cfg)
    split = build_splitting(cfg, A.M)
    u, c, s = _fixture_bundles(A, split)
    p = cfg["operation"].get("params", {})
    ell = int(p.get("ell", 1))
    samples = int(p.get("samples", 1000))
    orbit_len = int(p.get("orbit", 2000))

    pairs = {"u,c": (u, c), "c,s": (c, s), "u,s": (u, s)}
    tight = {}

    def _tight(item):
        name, (e1, e2) = item
        return name, dommod.tightest_constants(A, sys, e1, e2, ell,
                                               seed=seed, samples=samples)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        for name, vals in pool.map(_tight, sorted(pairs.items())):
            tight[name] = {"alpha": vals[0], "theta": vals[1], "gamma": vals[2]}

    certs = {
        "u,c": dommod.check_domination(A, sys, u, c, ell,
                                       float(p.get("alpha_uc", 0.6)),
                                       float(p.get("theta_uc", 1.0)),
                                       seed=seed, samples=samples,
                                       orbit_len=orbit_len, pair="u,c"),
        "c,s": dommod.check_domination(A, sys, c, s, ell,
                                       float(p.get("alpha_cs", 0.5)),
                                       float(p.get("theta_cs", 0.9)),
                                       seed=seed, samples=samples,
                                       orbit_len=orbit_len, pair="c,s"),
    }
    results = {"tightest": tight, "certificates": certs, "ell": ell}
    verdicts = {}
    if cfg["cocycle"]["variant"] == "example-2.8":
        verdicts = {
            "alpha_uc_exact": abs(tight["u,c"]["alpha"] - 0.5) < 1e-12,
            "theta_uc_exact": abs(tight["u,c"]["theta"] - 2.0) < 1e-12,
            "alpha_cs_exact": abs(tight["c,s"]["alpha"] - 1.0 / 3.0) < 1e-12,
            "theta_cs_exact": abs(tight["c,s"]["theta"] - 1.0) < 1e-12,
            "alpha_us_exact": abs(tight["u,s"]["alpha"] - 1.0 / 6.0) < 1e-12,
            "gamma_orthogonal": abs(tight["u,c"]["gamma"] - math.pi / 2) < 1e-9,
        }
    verdicts["certificate_uc"] = certs["u,c"].passed
    verdicts["certificate_cs"] = certs["c,s"].passed
    return results, verdicts, []


def op_persistence_probe(cfg, sys, seed, threads):
    A = build_cocycle(cfg)
    split = build_splitting(cfg, A.M)
    u, c, _ = _fixture_bundles(A, split)
    p = cfg["operation"].get("params", {})
    ell = int(p.get("ell", 1))
    deltas = [float(v) for v in p.get("deltas", [0.0, 0.01, 0.05, 0.2, 1.5])]
    rows = dommod.persistence_probe(A, sys, u, c, ell, deltas, seed=seed,
                                    samples=int(p.get("samples", 200)))
    threshold = None
    for row in rows:
        if not row["passed"]:
            threshold = row["delta"]
            break
    results = {"table": rows, "first_fail_delta": threshold}
    verdicts = {
        "passes_small_deltas": all(r["passed"] for r in rows if r["delta"] <= 0.05),
        "fails_large_delta": not rows[-1]["passed"] if rows[-1]["delta"] >= 1.0
        else True,
    }
    return results, verdicts, []


def op_kac_return(cfg, sys, seed, threads):
    p = cfg["operation"].get("params", {})
    r = float(p.get("r", 0.05))
    horizon = int(p.get("horizon", 100_000))
    center = pertmod.choose_center(sys, seed=seed)
    x0 = basemod.sample_measure(sys, seed + 1, 1)[0]
    stats = basemod.return_time_stats(sys, center, r, x0, horizon)
    expected = 1.0 / (2.0 * r) if sys.dim == 1 else 1.0 / (math.pi * r * r)
    results = {"mean_return": stats.mean_return,
               "visit_count": stats.visit_count,
               "visit_fraction": stats.visit_fraction,
               "kac_prediction": expected}
    verdicts = {"within_ten_percent":
                abs(stats.mean_return - expected) <= 0.1 * expected}
    return results, verdicts, []


def op_verify_lemma(cfg, sys, seed, threads):
    A = build_cocycle(cfg)
    split = build_splitting(cfg, A.M)
    p = cfg["operation"].get("params", {})
    n = int(p.get("horizon", 100_000))
    B, params = _build_bump(A, split, sys, p, seed)
    x0 = basemod.sample_measure(sys, seed + 7, 1)[0]
    rep = pertmod.verify_lemma(A, B, sys, split, params, n, seed=seed, x0=x0)
    run_a = specmod.lyapunov_qr(A, sys, x0, n, split.D, q0=split.cu_at(x0),
                                checkpoints=50)
    run_b = specmod.lyapunov_qr(B, sys, x0, n, split.D, q0=split.cu_at(x0),
                                checkpoints=50)
    rows = []
    for run, tag in ((run_a, "A"), (run_b, "B")):
        for rec in run.trace:
            rows.append((int(rec[0]), f"lambda_u_{tag}",
                         float(np.sum(rec[1:1 + split.d]))))
            rows.append((int(rec[0]), f"central_sum_{tag}",
                         float(np.sum(rec[1 + split.d:])))),
    results = {"report": rep,
               "params": {"epsilon": params.epsilon, "r": params.r,
                          "omega": params.omega, "delta": params.delta,
                          "inner_fraction": params.inner_fraction,
                          "center": params.p, "Delta": params.Delta}}
    verdicts = {
        "items_exact": rep.equal_outside_ball and rep.stable_action_preserved
        and rep.rotation_form_verified,
        "norm_within_budget": rep.norm_distance <= rep.norm_budget + 1e-12,
        "entropy_conserved": rep.entropy_gap < 1e-2,
        "central_sum_positive": rep.central_sum_after > 0.0,
        "unstable_dropped": rep.unstable_after < rep.unstable_before,
    }
    return results, verdicts, rows


def op_balance_central(cfg, sys, seed, threads):
    A = build_cocycle(cfg)
    split = build_splitting(cfg, A.M)
    p = cfg["operation"].get("params", {})
    n = int(p.get("horizon", 100_000))
    eps = float(p.get("epsilon", 0.1))
    B, params = _build_bump(A, split, sys, p, seed)
    x0 = basemod.sample_measure(sys, seed + 7, 1)[0]
    run_b = specmod.lyapunov_qr(B, sys, x0, n, split.D, q0=split.cu_at(x0))
    spec_b = specmod.LyapunovSpectrum.from_exponents(
        run_b.exponents, gap_tol=1e-4, tail_rule="negative block + tail")
    bal = pertmod.balance_central(B, split, eps, spec_b)
    C = bal.cocycle
    run_c = specmod.lyapunov_qr(C, sys, x0, n, split.D, q0=split.cu_at(x0))
    central_c = np.sort(run_c.exponents)[::-1][split.d:]
    zero_gap = float(p.get("zero_gap", 1e-2))

    u, c = covariant_bundles(C, sys, split,
                             spin=int(p.get("spin", 150)))
    s = dommod.Bundle(np.eye(A.M)[:, split.D:], includes_tail=True)
    cert_uc = dommod.check_domination(
        C, sys, u, c, 1, float(p.get("alpha_uc", 0.75)),
        float(p.get("theta_uc", 0.5)), seed=seed,
        samples=int(p.get("samples", 200)),
        orbit_len=int(p.get("orbit", 500)), pair="u,c")
    cert_cs = dommod.check_domination(
        C, sys, c, s, 1, float(p.get("alpha_cs", 0.6)),
        float(p.get("theta_cs", 0.5)), seed=seed,
        samples=int(p.get("samples", 200)),
        orbit_len=int(p.get("orbit", 500)), pair="c,s")
    spec_c = specmod.LyapunovSpectrum.from_exponents(
        run_c.exponents, gap_tol=1e-4, tail_rule="negative block + tail")
    cls = dommod.classify_ph(spec_c, [cert_uc, cert_cs], zero_gap=zero_gap)

    spread = float(central_c.max() - central_c.min()) if split.c else 0.0
    results = {
        "spectrum_B": run_b.exponents, "spectrum_C": run_c.exponents,
        "factors": bal.factors, "target": bal.target, "clamped": bal.clamped,
        "central_exponents_C": central_c, "central_spread": spread,
        "classification": cls,
        "certificates": {"u,c": cert_uc, "c,s": cert_cs},
    }
    verdicts = {
        "non_uniformly_anosov": cls.verdict == "non_uniformly_anosov",
        "central_off_zero": bool(np.min(np.abs(central_c)) > zero_gap),
        "central_spread_small": spread < 4.0 * eps,
    }
    return results, verdicts, []


OPERATIONS = {
    "lyapunov-qr": op_lyapunov_qr,
    "entropy-dualpath": op_entropy_dualpath,
    "domination-certify": op_domination_certify,
    "persistence-probe": op_persistence_probe,
    "kac-return": op_kac_return,
    "verify-lemma": op_verify_lemma,
    "balance-central": op_balance_central,
}


def run_config(config_text: str, out_dir: Path, seed_override=None,
               threads_override=None) -> dict:
    try:
        cfg = yaml.safe_load(config_text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a mapping")
    name = _require(cfg, "operation.name", str)
    if name not in OPERATIONS:
        raise ConfigError(f"operation.name: unknown operation {name!r}; "
                          f"choose from {sorted(OPERATIONS)}")
    seed = int(seed_override if seed_override is not None
               else _require(cfg, "seed", required=False, default=0))
    threads = int(threads_override if threads_override is not None
                  else _require(cfg, "threads", required=False, default=1))
    sys_ = build_system(cfg)

    t0 = time.perf_counter()
    results, verdicts, trace_rows = OPERATIONS[name](cfg, sys_, seed, threads)
    elapsed = time.perf_counter() - t0

    payload = {
        "schema_version": repmod.SCHEMA_VERSION,
        "tool_version": TOOL_VERSION,
        "scenario": cfg.get("scenario", name),
        "operation": name,
        "seed": seed,
        "config_digest": repmod.config_digest(config_text),
        "config_text": config_text,
        "results": results,
        "verdicts": verdicts,
        "all_passed": all(verdicts.values()) if verdicts else True,
        "timing_seconds": elapsed,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    repmod.write_report(out_dir / "report.json", payload)
    if trace_rows:
        repmod.write_trace(out_dir / "trace.csv", trace_rows)
    return payload


# --------------------------------------------------------------------------
# witness replay


def replay_witness(report_path: str, witness_id: str, echo=print):
    rep = repmod.read_report(report_path)
    digest = repmod.config_digest(rep["config_text"])
    if digest != rep["config_digest"]:
        raise ConfigError("report config digest mismatch: refusing to replay "
                          "a tampered or stale report")
    certs = rep.get("results", {}).get("certificates")
    if not certs:
        raise ConfigError("report contains no certificates to replay")
    pair = witness_id.split(":")[0]
    if pair not in certs or not certs[pair].get("worst_witness"):
        raise ConfigError(f"witness {witness_id!r} not found in report")
    wit = certs[pair]["worst_witness"]
    cfg = yaml.safe_load(rep["config_text"])
    sys_ = build_system(cfg)
    A = build_cocycle(cfg)
    split = build_splitting(cfg, A.M)
    u, c, s = _fixture_bundles(A, split)
    bundles = {"u": u, "c": c, "s": s}
    name1, name2 = pair.split(",")
    e1, e2 = bundles[name1], bundles[name2]
    ell = certs[pair]["ell"]
    x = basemod.as_point(wit["point"])
    echo(f"witness {witness_id} at x = {x.tolist()} (ell = {ell})")
    prod = opmod.cocycle_product(A, sys_, x, ell)
    if wit["u"] == ["tail"]:
        nu = prod.tail.sup_abs(A.M)
        echo(f"  ||A^l u|| (tail supremum)       = {nu:.17g}")
    else:
        uvec = e2.at(x) @ np.asarray(wit["u"], dtype=float)
        nu = float(np.linalg.norm(prod.block @ uvec))
        echo(f"  ||A^l u||  (u in E2)            = {nu:.17g}")
    vvec = e1.at(x) @ np.asarray(wit["v"], dtype=float)
    nv = float(np.linalg.norm(prod.block @ vvec))
    echo(f"  ||A^l v||  (v in E1)            = {nv:.17g}")
    ratio = nu / nv
    echo(f"  ratio ||A^l u|| / ||A^l v||     = {ratio:.17g}")
    echo(f"  stored worst ratio              = {wit['ratio']:.17g}")
    echo(f"  alpha threshold                 = {certs[pair]['alpha']}")
    echo(f"  verdict: ratio {'<=' if ratio <= certs[pair]['alpha'] else '>'} alpha")
    return ratio


# --------------------------------------------------------------------------
# click entry points


@click.group()
@click.version_option(TOOL_VERSION)
def main():
    """Numerical laboratory for compact-operator cocycles."""


@main.command("run")
@click.option("--config", "config_ref", required=True,
              help="Path to a YAML config, or a built-in scenario name.")
@click.option("--out", "out_dir", default="out", show_default=True,
              help="Output directory for report.json / trace.csv.")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--threads", type=int, default=None,
              help="Override the config thread count.")
def run_cmd(config_ref, out_dir, seed, threads):
    """Run one experiment config and write its report."""
    try:
        text = load_config_text(config_ref)
        payload = run_config(text, Path(out_dir), seed, threads)
    except ConfigError as exc:
        raise click.ClickException(f"config error: {exc}")
    except CocycleLabError as exc:
        raise click.ClickException(f"numerical diagnostic: {exc}")
    for key, ok in payload["verdicts"].items():
        click.echo(f"{'PASS' if ok else 'FAIL'}  {key}")
    click.echo(f"report: {Path(out_dir) / 'report.json'} "
               f"({payload['timing_seconds']:.1f}s)")
    if not payload["all_passed"]:
        raise SystemExit(1)


@main.command("replay-witness")
@click.argument("report_path")
@click.argument("witness_id")
def replay_cmd(report_path, witness_id):
    """Recompute a stored domination witness step by step."""
    try:
        replay_witness(report_path, witness_id, echo=click.echo)
    except (ConfigError, FileNotFoundError) as exc:
        raise click.ClickException(str(exc))


@main.command("list-scenarios")
def list_cmd():
    """List the built-in reproduction scenarios."""
    for name in list_scenario_names():
        click.echo(name)


if __name__ == "__main__":
    main()
