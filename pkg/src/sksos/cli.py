"""Command-line driver: ``python -m sksos <subcommand> ...``.

Exit status is 0 on success, 2 when a check the run asserts fails, and 1 on
a configuration or runtime error.  Reports are JSON documents
``{config, version, timestamp, trials, summary}``; sweeps also write CSV.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import iid_comparison, scaling_sweep, trial_stream, worker_count, write_sweep_csv
from .ensembles import RngStream, haar_moment_suite, sample_goe, sample_haar_stiefel
from .errors import InfeasibleDimension, SksosError
from .etf import check_etf, etf_deg4_extension, etf_extension_spectral, perturbation_projector, read_frame, simplex_etf
from .linalg import PairIndex, min_eig
from .pseudomoments import assemble_Z, certify_psd, heuristic_X22, verify_constraints
from .tensors import build_deg2k_model, pseudomoment_from_model
from .witness import montanari_sen_witness, objective_value, spectral_certificate, witness_from_frame

EXIT_OK, EXIT_ERROR, EXIT_CHECK_FAILED = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    subcommand: str
    N: int = 100
    delta: float = 0.5
    alpha: float = 0.2
    trials: int = 1
    master_seed: int = 0
    tol_psd: float = 1e-8
    tol_constraints: float = 1e-10
    method: str = "auto"
    output_path: str | None = None
    format: str = "json"
    Ns: list = field(default_factory=list)
    deltas: list = field(default_factory=list)
    alphas: list = field(default_factory=list)
    workers: int | None = None
    samples: int = 100_000
    simplex_r: list = field(default_factory=list)
    frame_path: str | None = None
    r: int | None = None
    k: int = 2
    coupling: str = "joint"
    ambient: bool = False
    assert_monotone: bool = False

    def validate(self) -> "ExperimentConfig":
        def unit(name, v):
            if not 0 < v < 1:
                raise ConfigError(f"{name} must lie strictly between 0 and 1, got {v}")

        if self.method not in ("auto", "dense", "iterative"):
            raise ConfigError(f"method must be auto, dense or iterative, got {self.method!r}")
        if self.format not in ("json", "csv"):
            raise ConfigError(f"format must be json or csv, got {self.format!r}")
        if self.trials < 1:
            raise ConfigError(f"trials must be at least 1, got {self.trials}")
        if self.subcommand in ("certify", "tensor", "compare-iid", "haar-test") and self.N < 2:
            raise ConfigError(f"N must be at least 2, got {self.N}")
        if self.subcommand == "certify":
            unit("delta", self.delta)
            unit("alpha", self.alpha)
        if self.subcommand == "sweep":
            if not (self.Ns and self.deltas and self.alphas):
                raise ConfigError("sweep needs nonempty --ns, --deltas and --alphas")
            if min(self.Ns) < 2:
                raise ConfigError("every N in --ns must be at least 2")
            for d in self.deltas:
                unit("delta", d)
            for a in self.alphas:
                unit("alpha", a)
        if self.subcommand == "tensor":
            if self.k not in (1, 2, 3):
                raise ConfigError(f"k must be 1, 2 or 3, got {self.k}")
            if self.r is None or not 1 <= self.r <= self.N:
                raise ConfigError("tensor needs 1 <= --r <= --n")
            if self.coupling not in ("joint", "mean"):
                raise ConfigError("coupling must be joint or mean")
        if self.subcommand == "compare-iid" and (self.r is None or not 1 <= self.r < self.N):
            raise ConfigError("compare-iid needs 1 <= --r < --n")
        if self.subcommand == "haar-test" and self.samples < 10_000:
            raise ConfigError("samples must be at least 10^4")
        if self.subcommand == "etf" and not (self.simplex_r or self.frame_path):
            raise ConfigError("etf needs --simplex-r or --frame")
        return self


# --------------------------------------------------------------------------
# subcommands; each returns (trials, summary, passed)


def _certify_trial(args):
    cfg, t = args
    rec = {"trial": t, "N": cfg.N, "delta": cfg.delta, "alpha": cfg.alpha}
    try:
        W = sample_goe(cfg.N, trial_stream(cfg.master_seed, cfg.N, t))
        b = montanari_sen_witness(W, cfg.delta)
        Z = assemble_Z(b.M, cfg.alpha)
        cons = verify_constraints(Z, cfg.tol_constraints)
        psd = certify_psd(Z, cfg.tol_psd, "full", cfg.method)
        rec.update(
            r=b.r,
            objective_witness=objective_value(b.M, W),
            objective_nudged=float(np.sum(W * Z.Z11) / cfg.N),
            spectral_certificate=spectral_certificate(W),
            max_offdiag_M=b.max_offdiag_M,
            constraints=cons.as_dict(),
            psd=psd.as_dict(),
            error="",
        )
    except Exception as exc:
        rec["error"] = f"{type(exc).__name__}: {exc}"
    return rec


def _map(fn, items, workers):
    if workers == 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def run_certify(cfg):
    trials = _map(_certify_trial, [(cfg, t) for t in range(cfg.trials)], worker_count(cfg.workers))
    ok = [t for t in trials if not t["error"]]
    n_pass = sum(t["psd"]["status"] == "PASS" for t in ok)
    n_cons = sum(t["constraints"]["passed"] for t in ok)
    summary = {
        "psd_pass": n_pass,
        "constraints_pass": n_cons,
        "errors": len(trials) - len(ok),
        "min_lambda": min((t["psd"]["lambda_min"] for t in ok), default=math.nan),
        "mean_objective_witness": float(np.mean([t["objective_witness"] for t in ok])) if ok else math.nan,
    }
    return trials, summary, n_pass == len(trials) and n_cons == len(trials)


def run_sweep(cfg):
    res = scaling_sweep(cfg.Ns, cfg.deltas, cfg.alphas, cfg.trials, cfg.master_seed, cfg.workers)
    d = res.as_dict()
    summary = {"medians": d["medians"], "monotone": d["monotone"],
               "errors": sum(bool(r.error) for r in res.rows)}
    passed = True
    if cfg.assert_monotone:
        passed = all(all(flags.values()) for flags in res.monotone.values())
    if cfg.output_path and cfg.format == "csv":
        write_sweep_csv(Path(cfg.output_path).with_suffix(".csv"), res.rows)
    return d["rows"], summary, passed


def run_haar(cfg):
    rep = haar_moment_suite(cfg.N, cfg.samples, RngStream(cfg.master_seed, 0))
    summary = {"max_abs_z": rep.max_abs_z, "passed": rep.passed(4.0)}
    return rep.as_dict()["moments"], summary, rep.passed(4.0)


def _etf_record(label, F, tol):
    rec = {"frame": label, "r": F.r, "N": F.N}
    verdict = check_etf(F, 1e-12)
    rec["is_etf"] = verdict.is_etf
    try:
        Z = etf_deg4_extension(F)
    except InfeasibleDimension as exc:
        rec.update(expected_error="InfeasibleDimension", message=str(exc), passed=True)
        return rec
    Zs = etf_extension_spectral(F)
    c1, c2 = verify_constraints(Z, tol), verify_constraints(Zs, tol)
    lam1, lam2 = min_eig(Z.full(), "dense"), min_eig(Zs.full(), "dense")
    agree = float(np.max(np.abs(Z.Z22 - Zs.Z22)))
    rec.update(
        projector_rank=perturbation_projector(F).rank,
        entrywise_constraints=c1.as_dict(),
        spectral_constraints=c2.as_dict(),
        lambda_min_entrywise=lam1,
        lambda_min_spectral=lam2,
        max_route_difference=agree,
        passed=bool(c1.passed and c2.passed and min(lam1, lam2) >= -1e-9 and agree <= 1e-8),
    )
    return rec


def run_etf(cfg):
    trials = []
    for r in cfg.simplex_r:
        trials.append(_etf_record(f"simplex-{r}", simplex_etf(r), cfg.tol_constraints))
    if cfg.frame_path:
        trials.append(_etf_record(str(cfg.frame_path), read_frame(cfg.frame_path), cfg.tol_constraints))
    passed = all(t["passed"] for t in trials)
    return trials, {"frames": len(trials), "passed": passed}, passed


def run_tensor(cfg):
    trials = []
    for t in range(cfg.trials):
        V = sample_haar_stiefel(cfg.N, cfg.r, RngStream(cfg.master_seed, t))
        model = build_deg2k_model(V, cfg.k, coupling=cfg.coupling, ambient=cfg.ambient)
        Z = pseudomoment_from_model(model, cfg.k)
        rec = {
            "trial": t,
            "sigma_sq": {str(q): s for q, s in model.sigma_sq.items()},
            "diag_mean": model.info["diag_mean"],
            "lambda_min": float(np.linalg.eigvalsh(Z)[0]),
            "constraint_residual": model.info.get("residual", 0.0),
        }
        if cfg.k == 2:
            rec["max_gap_to_heuristic"] = heuristic_gap(V, Z)
        trials.append(rec)
    passed = all(t["lambda_min"] >= -1e-9 for t in trials)
    return trials, {"min_lambda": min(t["lambda_min"] for t in trials), "passed": passed}, passed


def heuristic_gap(V: np.ndarray, Zmult: np.ndarray) -> float:
    """Largest difference between an order-2 pseudomoment matrix and the closed-form
    heuristic block, over pairs of distinct-index pairs."""
    N = V.shape[1]
    X = heuristic_X22(witness_from_frame(V).M)
    pidx = PairIndex(N)
    flat = pidx.first * N + pidx.second
    return float(np.max(np.abs(Zmult[np.ix_(flat, flat)] - X)))


def run_compare_iid(cfg):
    res = iid_comparison(cfg.r, cfg.N, cfg.trials, RngStream(cfg.master_seed, 0))
    rec = asdict(res)
    rec["ratio"] = res.ratio
    return [rec], {"ratio": res.ratio}, True


RUNNERS = {
    "certify": run_certify,
    "sweep": run_sweep,
    "haar-test": run_haar,
    "etf": run_etf,
    "tensor": run_tensor,
    "compare-iid": run_compare_iid,
}


# --------------------------------------------------------------------------
# report handling


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def build_report(cfg: ExperimentConfig, trials, summary) -> dict:
    return _clean({"config": asdict(cfg), "version": __version__,
                   "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
                   "trials": trials, "summary": summary})


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def without_timestamp(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != "timestamp"}


def run(cfg: ExperimentConfig) -> tuple[int, dict]:
    cfg.validate()
    trials, summary, passed = RUNNERS[cfg.subcommand](cfg)
    report = build_report(cfg, trials, summary)
    if cfg.output_path:
        out = Path(cfg.output_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.with_suffix(".json").write_text(report_json(report))
    return (EXIT_OK if passed else EXIT_CHECK_FAILED), report


# --------------------------------------------------------------------------
# argument parsing


def _floats(text):
    return [float(x) for x in text.split(",") if x]


def _ints(text):
    return [int(x) for x in text.split(",") if x]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sksos", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="subcommand", required=True)

    def common(sp, trials=True):
        sp.add_argument("--seed", dest="master_seed", type=int, default=0)
        sp.add_argument("--output", dest="output_path")
        if trials:
            sp.add_argument("--trials", type=int, default=1)

    c = sub.add_parser("certify", help="build witness and Z, check constraints and PSD")
    c.add_argument("--n", dest="N", type=int, default=100)
    c.add_argument("--delta", type=float, default=0.5)
    c.add_argument("--alpha", type=float, default=0.2)
    c.add_argument("--method", default="auto")
    c.add_argument("--tol-psd", type=float, default=1e-8)
    c.add_argument("--tol-constraints", type=float, default=1e-10)
    c.add_argument("--workers", type=int)
    common(c)

    s = sub.add_parser("sweep", help="diagnostics over a grid of sizes")
    s.add_argument("--ns", dest="Ns", type=_ints, required=True)
    s.add_argument("--deltas", type=_floats, default=[0.5])
    s.add_argument("--alphas", type=_floats, default=[0.2])
    s.add_argument("--format", default="csv")
    s.add_argument("--workers", type=int)
    s.add_argument("--assert-monotone", action="store_true")
    common(s)

    h = sub.add_parser("haar-test", help="Monte Carlo check of Haar moments")
    h.add_argument("--n", dest="N", type=int, default=6)
    h.add_argument("--samples", type=int, default=100_000)
    common(h, trials=False)

    e = sub.add_parser("etf", help="closed-form ETF extensions")
    e.add_argument("--simplex-r", type=_ints, default=[])
    e.add_argument("--frame", dest="frame_path")
    e.add_argument("--tol-constraints", type=float, default=1e-10)
    common(e, trials=False)

    t = sub.add_parser("tensor", help="conditioned gaussian tensor model")
    t.add_argument("--n", dest="N", type=int, default=12)
    t.add_argument("--r", type=int, default=6)
    t.add_argument("--k", type=int, default=2)
    t.add_argument("--coupling", default="joint")
    t.add_argument("--ambient", action="store_true")
    common(t)

    i = sub.add_parser("compare-iid", help="Haar versus iid frame tightness")
    i.add_argument("--n", dest="N", type=int, default=100)
    i.add_argument("--r", type=int, default=50)
    common(i)
    return p


def config_from_args(ns: argparse.Namespace) -> ExperimentConfig:
    known = set(ExperimentConfig.__dataclass_fields__)
    return ExperimentConfig(**{k: v for k, v in vars(ns).items() if k in known})


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = config_from_args(ns)
        code, report = run(cfg)
    except (ConfigError, SksosError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if not cfg.output_path:
        sys.stdout.write(report_json(report))
    else:
        print(json.dumps(_clean(report["summary"]), sort_keys=True))
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
