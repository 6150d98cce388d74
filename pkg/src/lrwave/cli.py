"""Command-line front end: ``lrwave {flow,scatter,hj,verify,wavefront} CONFIG``.

Configs are YAML (or JSON) files validated against strict schemas; unknown keys are
rejected. Every command writes its artifacts atomically into the output directory and
finishes with ``manifest.json`` listing each file with its sha256. Artifacts are
byte-identical for identical config and seed; timestamps live only in the manifest.

Exit codes: 0 success, 2 configuration error, 3 domain verdict (trapped,
inconclusive or failed check), 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import __version__
from .asymptotics import (RegionSpec, classify_backward_nontrapping, compute_z_minus, fit_high_energy_rates,
                          jacobian_S_minus, region_escape_check, sample_region)
from .errors import (BoundaryMassError, ConvergenceError, DivergenceError, InversionError, IntegrationError,
                     LRWaveError)
from .flows import FlowKind, FlowOptions, a_priori_bounds, flow_batch, integrate_flow, kinetic_homogeneity_check
from .hj import R_CANDIDATES, build_hj, hj_residual_fd, w_table_csv
from .microlocal import (DEFAULT_LADDER, WavefrontCase, WavefrontProbe, modified_harness, pushforward_harness,
                         singular_datum)
from .quantum import GridSpec, gaussian_packet
from .symbols import (CoefficientField, HamiltonianSpec, JapanesePower, check_decay_lipschitz, get_spec,
                      validate_decay_assumptions)
from .windows import TensorWindow

log = logging.getLogger("lrwave")

EXIT_OK, EXIT_CONFIG, EXIT_VERDICT, EXIT_NUMERICAL = 0, 2, 3, 4
NUMERICAL_ERRORS = (IntegrationError, DivergenceError, InversionError, ConvergenceError, BoundaryMassError)


# ---------------------------------------------------------------------------
# configuration schema
# ---------------------------------------------------------------------------

class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SpecConfig(Strict):
    name: str
    params: dict[str, float | int | str] = Field(default_factory=dict)


class PointConfig(Strict):
    x: list[float]
    xi: list[float]


class FlowConfig(Strict):
    start: PointConfig
    t_span: tuple[float, float]
    kind: Literal["full", "kinetic", "scaled"] = "full"
    lam: Optional[float] = None
    samples: int = Field(101, ge=2)


class RandomStarts(Strict):
    count: int = Field(ge=1)
    x_radius: float = Field(2.0, gt=0)
    xi_norm: float = Field(1.0, gt=0)


class ScatterConfig(Strict):
    starts: list[PointConfig] = Field(default_factory=list)
    random: Optional[RandomStarts] = None
    t0: float = Field(-1.0, lt=0)
    ladder: Optional[list[float]] = None
    jacobian: bool = False
    R: Optional[float] = None
    t_min: float = -2.0


class HJConfig(Strict):
    R: Optional[float] = None
    candidates: list[float] = Field(default_factory=lambda: list(R_CANDIDATES))
    t_min: float = -2.0
    t_grid: list[float]
    xi_grid: list[list[float]]
    residual: bool = True


class TestMode(Strict):
    asymmetric_metric: float = 0.0


CHECKS = ("assumptions", "energy", "nontrapping", "escape", "a_priori_bounds", "homogeneity",
          "high_energy_rates", "scattering", "lipschitz", "hj_residual")


class VerifyConfig(Strict):
    checks: list[Literal[CHECKS]] = Field(default_factory=lambda: list(CHECKS))
    samples: int = Field(5, ge=1)
    test_mode: Optional[TestMode] = None


class DatumConfig(Strict):
    kind: Literal["cusp", "jump", "gaussian"] = "cusp"
    xc: float = 0.0
    gamma: float = Field(0.25, ge=0.0)
    q: float = 0.0
    sigma: float = Field(1.0, gt=0)
    xi0: float = 0.0
    roll: tuple[float, float] = (0.5, 0.7)


class GridConfig(Strict):
    N: int = 4096
    L: float = 40.0


class ProbeConfig(Strict):
    x0: float
    xi0: float
    rx: float = 1.0
    rxi: Optional[float] = None


class WavefrontConfig(Strict):
    datum: DatumConfig = Field(default_factory=DatumConfig)
    t0: float = Field(gt=0)
    R: Optional[float] = None
    t_min: Optional[float] = None
    grid: GridConfig = Field(default_factory=GridConfig)
    probes: list[ProbeConfig]
    ladder: list[float] = Field(default_factory=lambda: list(DEFAULT_LADDER))
    s_sing: float = 1.0
    s_reg: float = 3.0
    harness: list[Literal["pushforward", "modified"]] = Field(default_factory=lambda: ["pushforward", "modified"])


class ExperimentConfig(Strict):
    spec: SpecConfig
    seed: int = 0
    output: Optional[str] = None
    tol: Optional[float] = Field(None, gt=0)
    flow: Optional[FlowConfig] = None
    scatter: Optional[ScatterConfig] = None
    hj: Optional[HJConfig] = None
    verify: Optional[VerifyConfig] = None
    wavefront: Optional[WavefrontConfig] = None


class ConfigError(Exception):
    pass


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None


def config_hash(cfg: ExperimentConfig) -> str:
    """sha256 of the canonical config; the output location does not enter."""
    blob = json.dumps(cfg.model_dump(mode="json", exclude={"output"}), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------------
# output handling
# ---------------------------------------------------------------------------

def _plain(obj):
    """Convert numpy containers and scalars to JSON-ready Python objects."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return _plain(obj.item())
    if isinstance(obj, float) and not np.isfinite(obj):
        return None  # strict JSON has no inf/nan
    if hasattr(obj, "as_dict"):
        return _plain(obj.as_dict())
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


class Output:
    """Atomic writer that records every artifact for the manifest."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.files = []

    def write(self, name: str, text: str):
        data = text.encode()
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix=f".{name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, self.root / name)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        self.files.append({"path": name, "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)})

    def manifest(self, cfg, command, started, status, exit_code):
        body = {"tool": "lrwave", "version": __version__, "command": command,
                "config_sha256": config_hash(cfg), "started": started,
                "finished": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
                "status": status, "exit_code": exit_code, "files": list(self.files)}
        self.write("manifest.json", dumps(body))


def _csv(header, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def build_spec(cfg: ExperimentConfig) -> HamiltonianSpec:
    return get_spec(cfg.spec.name, **cfg.spec.params)


def flow_options(cfg: ExperimentConfig) -> FlowOptions:
    if cfg.tol is None:
        return FlowOptions()
    return FlowOptions(rtol=cfg.tol, atol=cfg.tol * 1e-2)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("LRWAVE_THREADS", "1")))
    except ValueError:
        return 1


def inject_asymmetry(spec: HamiltonianSpec, amp: float) -> HamiltonianSpec:
    """Copy of ``spec`` whose a_01 entry differs from a_10 by amp <x>^-mu (test mode only)."""
    if spec.n < 2:
        raise ConfigError("asymmetric metric injection needs n >= 2")
    metric = spec.metric
    pert = {jk: metric.entry(*jk) for jk in ((j, k) for j in range(spec.n) for k in range(spec.n))
            if metric.entry(*jk) is not None}
    pert[(0, 1)] = JapanesePower(amp, -spec.mu)
    pert.setdefault((1, 0), JapanesePower(0.0, -spec.mu))
    broken = CoefficientField(spec.n, pert, metric.mu, metric.c_low, metric.c_high)
    return HamiltonianSpec(spec.name + "+asym", broken, spec.potential, spec.mu, dict(spec.params))


def _random_starts(rng, n, count, x_radius, xi_norm):
    x = rng.uniform(-x_radius, x_radius, size=(count, n))
    d = rng.normal(size=(count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return x, xi_norm * d


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_flow(cfg: ExperimentConfig, out: Output) -> int:
    fc = cfg.flow
    spec = build_spec(cfg)
    kind = FlowKind.scaled(fc.lam) if fc.kind == "scaled" else FlowKind(fc.kind)
    tr = integrate_flow(spec, kind, (fc.start.x, fc.start.xi), tuple(fc.t_span), flow_options(cfg),
                        n_samples=fc.samples)
    n = spec.n
    header = ["t"] + [f"x{j}" for j in range(n)] + [f"xi{j}" for j in range(n)] + ["action", "energy_drift"]
    out.write("trajectory.csv", _csv(header, tr.to_rows()))
    out.write("flow.json", dumps({"spec": spec.describe(), "kind": fc.kind, "t_span": list(fc.t_span),
                                  "energy_drift": tr.energy_drift, "end": {"x": tr.y[-1], "xi": tr.eta[-1]}}))
    return EXIT_OK


def cmd_scatter(cfg: ExperimentConfig, out: Output) -> int:
    sc = cfg.scatter
    spec = build_spec(cfg)
    starts = [(np.array(p.x, float), np.array(p.xi, float)) for p in sc.starts]
    if sc.random is not None:
        rng = np.random.default_rng(cfg.seed)
        xs, xis = _random_starts(rng, spec.n, sc.random.count, sc.random.x_radius, sc.random.xi_norm)
        starts += list(zip(xs, xis))
    if not starts:
        raise ConfigError("scatter needs explicit or random starts")
    hj = None
    results = []
    code = EXIT_OK
    for x, xi in starts:
        verdict = classify_backward_nontrapping(spec, (x, xi))
        row = {"start": {"x": x, "xi": xi}, "nontrapping": verdict}
        if not verdict.is_backward_nontrapping:
            row["verdict"] = "indeterminate"
            code = EXIT_VERDICT
        else:
            # built only when needed: calibration itself may fail on trapping metrics
            hj = hj or build_hj(spec, t_min=min(sc.t_min, sc.t0), R=sc.R)
            if sc.jacobian:
                data = jacobian_S_minus(spec, hj, (x, xi), sc.t0, ladder=sc.ladder)
            else:
                data = compute_z_minus(spec, hj, (x, xi), sc.t0, ladder=sc.ladder, check_nontrapping=False)
            row["verdict"] = "ok"
            row["scattering"] = data
        results.append(row)
    out.write("scatter.json", dumps({"spec": spec.describe(), "hj": hj.describe() if hj else None, "t0": sc.t0,
                                     "results": results}))
    return code


def cmd_hj(cfg: ExperimentConfig, out: Output) -> int:
    hc = cfg.hj
    spec = build_spec(cfg)
    hj = build_hj(spec, t_min=hc.t_min, R=hc.R, candidates=tuple(hc.candidates))
    xi = np.asarray(hc.xi_grid, dtype=float)
    out.write("w_table.csv", w_table_csv(hj, hc.t_grid, xi))
    body = {"spec": spec.describe(), "hj": hj.describe(), "calibration": hj.calibration}
    if hc.residual:
        high = np.linalg.norm(xi, axis=1) >= hj.c4R + 1.0
        ts = [t for t in hc.t_grid if t < 0]
        body["residual"] = hj_residual_fd(hj, ts, xi[high]) if high.any() and ts else None
    out.write("hj.json", dumps(body))
    return EXIT_OK


# -- verify -----------------------------------------------------------------

def _check(passed, **measured):
    return {"passed": bool(passed), **measured}


def _starts_for(spec, rng, count):
    """Seeded starts that are backward nontrapping (drawn with |x| <= 2, |xi| = 1)."""
    xs, xis = [], []
    tries = 0
    while len(xs) < count and tries < 50 * count:
        x, xi = _random_starts(rng, spec.n, 1, 2.0, 1.0)
        tries += 1
        if classify_backward_nontrapping(spec, (x[0], xi[0]), T_max=50.0).is_backward_nontrapping:
            xs.append(x[0])
            xis.append(xi[0])
    return np.array(xs), np.array(xis)


def verify_checks(spec: HamiltonianSpec, names, samples: int, seed: int, opts: FlowOptions):
    rng = np.random.default_rng(seed)
    xs, xis = _starts_for(spec, rng, samples)
    lip_seed = int(rng.integers(2 ** 31))

    def assumptions():
        body = validate_decay_assumptions(spec).as_dict()
        body["orders"] = body.pop("passed")
        return _check(body.pop("ok"), **body)

    def energy():
        worst = 0.0
        for span in ((0.0, -50.0), (0.0, 50.0)):
            fb = flow_batch(spec, FlowKind.full(), xs, xis, span, opts=opts)
            worst = max(worst, float(np.max(fb.energy_drift)))
        return _check(worst <= 1e-8, max_relative_drift=worst, horizon=50.0)

    def nontrapping():
        vs = [classify_backward_nontrapping(spec, (x, k)) for x, k in zip(xs, xis)]
        return _check(len(vs) == samples and all(v.is_backward_nontrapping for v in vs),
                      escape_constants=[v.escape_constant for v in vs],
                      escape_speeds=[v.escape_speed for v in vs])

    def escape():
        region = RegionSpec(R=6.0, delta1=0.5)
        x, k = sample_region(region, spec.n, samples, seed=seed)
        return region_escape_check(spec, region, x, k, T=10.0)

    def bounds():
        rows = a_priori_bounds(spec, (2.0, 4.0, 8.0), seed=seed, opts=opts)
        al = np.array([r["alpha"] for r in rows])
        be = np.array([r["beta"] for r in rows])
        stable = np.all(np.isfinite(al)) and np.all(np.isfinite(be)) and al.max() <= 2 * al.min() \
            and be.max() <= 2 * be.min()
        return _check(stable, rows=rows)

    def homogeneity():
        res = [kinetic_homogeneity_check(spec, (x, k), lam, -1.0, opts)
               for x, k in zip(xs, xis) for lam in (2.0, 5.0, 10.0)]
        return _check(max(res) <= 1e-7, max_residual=max(res))

    def rates():
        if not spec.has_potential:
            return _check(True, note="no potential: full and kinetic flows coincide")
        r = fit_high_energy_rates(spec, (xs[0], xis[0]), ladder=(8.0, 16.0, 32.0, 64.0))
        return _check(max(r["eta_ratio"], r["y_ratio"]) <= 10.0, **r)

    def scattering():
        hj = build_hj(spec, t_min=-2.0)
        m = min(3, len(xs))
        z1 = [compute_z_minus(spec, hj, (x, k), -1.0).z_minus for x, k in zip(xs[:m], xis[:m])]
        z2 = [compute_z_minus(spec, hj, (x, k), -2.0).z_minus for x, k in zip(xs[:m], xis[:m])]
        dets = [jacobian_S_minus(spec, hj, (x, k), -1.0).det_S for x, k in zip(xs[:m], xis[:m])]
        gap = float(max(np.max(np.abs(a - b)) for a, b in zip(z1, z2)))
        return _check(gap <= 1e-4 and min(abs(d) for d in dets) > 0.1, t0_gap=gap, det_S=dets)

    def lipschitz():
        C = validate_decay_assumptions(spec).constants.get("metric/1", 0.0)
        beta = -(spec.mu + 1.0)
        lr = np.random.default_rng(lip_seed)
        n = spec.n
        X = lr.uniform(-20, 20, size=(10000, n))
        Y = X + lr.normal(scale=2.0, size=(10000, n))
        if n == 1:
            Y = np.where(X * Y > 0, Y, X * 0.5)
        worst = 0.0
        for j in range(n):
            for k in range(n):
                f = spec.metric.entry(j, k)
                if f is None:
                    continue
                rep = check_decay_lipschitz(lambda P: f.value(P), C, beta, X, Y)
                worst = max(worst, rep.max_ratio)
        return _check(worst <= 1.0, max_ratio=worst, C=C, beta=beta)

    def hj_res():
        hj = build_hj(spec, t_min=-2.0)
        lo = hj.c4R + 1.0
        if spec.n == 1:
            xi = np.linspace(lo, 4 * lo, 6)[:, None]
        else:
            d = rng.normal(size=(6, spec.n))
            xi = d / np.linalg.norm(d, axis=1, keepdims=True) * np.linspace(lo, 4 * lo, 6)[:, None]
        res = hj_residual_fd(hj, np.linspace(-2.0, -0.1, 6), xi)
        return _check(res["hj_residual"] <= 1e-6 and res["grad_residual"] <= 1e-5, **res)

    table = {"assumptions": assumptions, "energy": energy, "nontrapping": nontrapping, "escape": escape,
             "a_priori_bounds": bounds, "homogeneity": homogeneity, "high_energy_rates": rates,
             "scattering": scattering, "lipschitz": lipschitz, "hj_residual": hj_res}

    def run(name):
        try:
            return table[name]()
        except LRWaveError as exc:
            return {"passed": False, "error": type(exc).__name__, "message": str(exc)}

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        results = list(pool.map(run, names))
    return dict(zip(names, results))


def cmd_verify(cfg: ExperimentConfig, out: Output) -> int:
    vc = cfg.verify
    spec = build_spec(cfg)
    if vc.test_mode is not None and vc.test_mode.asymmetric_metric:
        spec = inject_asymmetry(spec, vc.test_mode.asymmetric_metric)
    names = list(dict.fromkeys(vc.checks))
    results = verify_checks(spec, names, vc.samples, cfg.seed, flow_options(cfg))
    all_ok = all(r["passed"] for r in results.values())
    out.write("verify.json", dumps({"spec": spec.describe(), "checks": results, "all_passed": all_ok}))
    if any("error" in r for r in results.values()):
        return EXIT_NUMERICAL
    return EXIT_OK if all_ok else EXIT_VERDICT


def cmd_wavefront(cfg: ExperimentConfig, out: Output) -> int:
    wc = cfg.wavefront
    spec = build_spec(cfg)
    grid = GridSpec(wc.grid.N, wc.grid.L)
    d = wc.datum
    if d.kind == "gaussian":
        u = gaussian_packet(grid, d.xc, d.xi0, d.sigma)
    else:
        u = singular_datum(grid, d.xc, 0.0 if d.kind == "jump" else d.gamma, d.q, d.roll)
    t_min = wc.t_min if wc.t_min is not None else -max(0.5, wc.t0)
    hj = build_hj(spec, t_min=t_min, R=wc.R)
    ladder = tuple(sorted(wc.ladder, reverse=True))
    probes = [WavefrontProbe(TensorWindow(p.x0, p.xi0, p.rx, p.rxi), ladder, wc.s_sing, wc.s_reg)
              for p in wc.probes]
    case = WavefrontCase(spec, hj, wc.t0, u, probes, name=cfg.spec.name)
    rows = []
    matrix = {}
    body = {"spec": spec.describe(), "hj": hj.describe(), "t0": wc.t0, "grid": {"N": grid.N, "L": grid.L}}
    for key in dict.fromkeys(wc.harness):
        res = pushforward_harness(case) if key == "pushforward" else modified_harness(case)
        side = "C" if key == "pushforward" else "B"
        body[key] = res
        matrix[key] = [r["agreement"] for r in res]
        for i, r in enumerate(res):
            for s in ("A", side):
                rep = r[s]
                rows += [(key, i, s, h, v, rep.slope) for h, v in zip(rep.ladder, rep.norms)]
    body["agreement"] = matrix
    out.write("wavefront.json", dumps(body))
    out.write("wavefront.csv", _csv(["harness", "probe", "side", "h", "norm", "slope"], rows))
    verdicts = [v for vs in matrix.values() for v in vs]
    return EXIT_OK if all(v == "pass" for v in verdicts) else EXIT_VERDICT


COMMANDS = {"flow": cmd_flow, "scatter": cmd_scatter, "hj": cmd_hj, "verify": cmd_verify,
            "wavefront": cmd_wavefront}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lrwave", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"lrwave {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name, help=f"run the {name} experiment")
        s.add_argument("config", help="YAML or JSON experiment config")
        s.add_argument("--out", help="output directory (overrides config 'output')")
        s.add_argument("--seed", type=int, help="seed for sampled starts (overrides config)")
        s.add_argument("--tol", type=float, help="flow relative tolerance (overrides config)")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        updates = {k: v for k, v in (("seed", args.seed), ("tol", args.tol), ("output", args.out))
                   if v is not None}
        if updates:
            cfg = ExperimentConfig.model_validate({**cfg.model_dump(), **updates})
        if getattr(cfg, args.command) is None:
            raise ConfigError(f"config has no '{args.command}' block")
    except (ConfigError, ValidationError) as exc:
        print(f"lrwave: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Output(cfg.output or "lrwave-out")
    started = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    try:
        code = COMMANDS[args.command](cfg, out)
        status = "ok" if code == EXIT_OK else "verdict"
    except ConfigError as exc:
        print(f"lrwave: configuration error: {exc}", file=sys.stderr)
        code, status = EXIT_CONFIG, "config_error"
        out.write("error.json", dumps({"error": "ConfigError", "message": str(exc)}))
    except NUMERICAL_ERRORS as exc:
        print(f"lrwave: numerical failure: {exc}", file=sys.stderr)
        code, status = EXIT_NUMERICAL, "numerical_failure"
        diag = {"error": type(exc).__name__, "message": str(exc)}
        for attr in ("last_time", "residuals", "diagnostics"):
            if hasattr(exc, attr):
                diag[attr] = getattr(exc, attr)
        out.write("error.json", dumps(diag))
    except LRWaveError as exc:
        print(f"lrwave: invalid request: {exc}", file=sys.stderr)
        code, status = EXIT_CONFIG, "invalid_request"
        out.write("error.json", dumps({"error": type(exc).__name__, "message": str(exc)}))
    out.manifest(cfg, args.command, started, status, code)
    return code


if __name__ == "__main__":
    sys.exit(main())
