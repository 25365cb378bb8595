"""End-to-end runs: toy curves, 2x2 simulation, and report assembly.

:func:`run_pipeline` executes one :class:`~bregdecomp.config.RunConfig` and
returns a :class:`Report` -- a JSON-ready document plus zero or more flat
tables.  Reports carry no timestamps or host details, so the same config
and seed always serialise to the same bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import calibration, decomposition, empirical
from .config import DGPConfig, RunConfig, ToyConfig, ZetaConfig
from .errors import SamplingError, UndefinedDiagnosticError
from .potentials import GaussianNatural, NegativeEntropy, Potential, SquaredEuclidean, gaussian_kl_array
from .sets import Intersection, ProjectionOptions, normal_alignment, sample_feasible, set_from_dict

SCHEMA_VERSION = "1.0"
CONVENTION_NOTICE = ("no estimator convention configured; using 'sequential' "
                     "(set estimation.convention to 'sequential' or 'baseline')")


@dataclass
class Table:
    columns: list
    rows: list

    def to_csv(self, fh) -> None:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(self.columns)
        for row in self.rows:
            out.writerow([_cell(v) for v in row])

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else repr(float(v))
    return v


# -- toy curves ------------------------------------------------------------


def gaussian_curves(cfg: ToyConfig | None = None) -> Table:
    """Closed-form penalty curves of the Gaussian forecasting toy.

    ``g1 = lam**2 / (2 sigma2)``, ``g2 = eps**2 / (2 sigma2)`` and
    ``g12 = rho * lam**2 * eps**2``; one total column per nonzero ``eps``.
    With ``sigma2 = 1`` the arithmetic is operation-for-operation that of
    the published figure script.
    """
    cfg = cfg or ToyConfig()
    grid = cfg.lam_grid
    if grid.points < 2 or not grid.stop > grid.start:
        raise ValueError("lam grid needs at least two points and stop > start")
    lam = np.linspace(grid.start, grid.stop, grid.points)
    rho = cfg.rho_toy

    def g1(lam):
        return 0.5 * lam**2 / cfg.sigma2

    def g2(eps):
        return 0.5 * eps**2 / cfg.sigma2

    def g12(lam, eps):
        return rho * lam**2 * eps**2

    base_g1 = g1(lam)
    columns = ["lam", "g1"]
    series = [lam, base_g1]
    for eps in cfg.eps_list:
        if eps == 0:
            continue
        columns.append(f"total_eps_{float(eps)!r}")
        series.append(base_g1 + g2(eps) + g12(lam, eps))
    return Table(columns, [list(map(float, row)) for row in zip(*series)])


# -- simulation ------------------------------------------------------------


def simulate_2x2(dgp: DGPConfig, seed: int) -> empirical.SampleFrame:
    """Draw ``dgp.n`` forecasts per regime and score them by Gaussian KL.

    The forecast mean is ``mu`` (regime 00), ``mu + eps`` (01), a lagged
    proxy ``mu + lam * z`` (10), or ``mu + eps + eta`` (11), where the proxy
    error ``eta = lam * (r * s + sqrt(1 - r**2) * z)`` leans towards the
    order shift's direction ``s`` with weight ``r = interaction_corr``.  The
    loss is the regret ``KL(N(mu, sigma2) || N(m, sigma2))``, so the regime
    means are ``0``, ``eps**2 / 2s2``, ``lam**2 / 2s2`` and their sum plus
    ``r * lam * |eps| / s2``.  All weights are 1; clusters are assigned
    round-robin across the whole sample.
    """
    lam = dgp.lam
    for name, v in (("mu", dgp.mu), ("lam_noise", lam), ("eps_shift", dgp.eps_shift),
                    ("interaction_corr", dgp.interaction_corr)):
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite")
    if not dgp.sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    if lam < 0:
        raise ValueError("lam_noise must be >= 0")
    if not -1 <= dgp.interaction_corr <= 1:
        raise ValueError("interaction_corr must lie in [-1, 1]")
    if dgp.n < 1 or dgp.n_clusters < 1:
        raise ValueError("n and n_clusters must be >= 1")

    rng = np.random.default_rng(seed)
    n, mu, eps, r = dgp.n, dgp.mu, dgp.eps_shift, dgp.interaction_corr
    s = 1.0 if eps >= 0 else -1.0
    z10 = rng.standard_normal(n)
    z11 = rng.standard_normal(n)
    m = np.concatenate([
        np.full(n, mu),
        np.full(n, mu + eps),
        mu + lam * z10,
        mu + eps + lam * (r * s + math.sqrt(1.0 - r * r) * z11),
    ])
    y = gaussian_kl_array(m, dgp.sigma2, mu, dgp.sigma2)
    regime = np.repeat(np.arange(4), n)
    ones = np.ones(4 * n)
    cluster = np.arange(4 * n) % dgp.n_clusters
    return empirical.SampleFrame(regime, y, ones, ones, cluster)


def dgp_targets(dgp: DGPConfig) -> dict:
    """Population components of :func:`simulate_2x2` (sequential = baseline here)."""
    lam, eps, s2 = dgp.lam, dgp.eps_shift, dgp.sigma2
    return {
        "g1": lam**2 / (2 * s2),
        "g2": eps**2 / (2 * s2),
        "g12": dgp.interaction_corr * lam * abs(eps) / s2,
    }


# -- pipeline --------------------------------------------------------------


@dataclass
class Report:
    document: dict
    tables: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.document), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return None if not math.isfinite(obj) else float(obj)
    return obj


def build_potential(spec: dict) -> Potential:
    kind = spec.get("kind")
    if kind == "squared_euclidean":
        return SquaredEuclidean(int(spec["dim"]), spec.get("weights"))
    if kind == "negative_entropy":
        return NegativeEntropy(int(spec["dim"]))
    if kind == "gaussian_natural":
        return GaussianNatural()
    raise ValueError(f"unknown potential kind {kind!r}")


def _delta_ncx(cfg: RunConfig, g2: float, g1: float, delta_emp_auto: float = 0.0):
    z = cfg.robust.zeta
    if isinstance(z, ZetaConfig):
        z = decomposition.zeta_upper_bound(z.rho, z.alpha, g2, g1, z.c_const, z.kappa_hat, z.d_lam, z.d_eps)
    return decomposition.NcxPenalty(cfg.robust.delta_relax, z, cfg.robust.delta_emp + delta_emp_auto)


def _summary(cfg, g1, g2, g12, ncx) -> dict:
    ratio = decomposition.penalty_ratio(ncx.total, g1, g2, g12, cfg.robust.ratio_eps)
    return {
        "delta_ncx": {"delta_relax": ncx.delta_relax, "zeta": ncx.zeta, "delta_emp": ncx.delta_emp,
                      "total": ncx.total},
        "lb_safe": decomposition.lb_safe(g1, g2, g12, ncx.total),
        "penalty_ratio": ratio.r,
        "verdict": ratio.verdict,
    }


def _run_decompose(cfg: RunConfig, notes: list) -> Report:
    phi = build_potential(cfg.potential)
    try:
        set_eps = set_from_dict(cfg.sets["eps"])
        set_lam = set_from_dict(cfg.sets["lam"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"config.sets: {exc}") from exc
    opts = ProjectionOptions(**vars(cfg.projection))
    p_star = np.array(cfg.p_star)
    if cfg.hull_is_exact is None:
        rep = decomposition.decompose(phi, set_eps, set_lam, p_star, opts)
    else:
        rep = decomposition.convexified_decompose(phi, set_eps, set_lam, p_star, opts, cfg.hull_is_exact)
    notes.extend(rep.warnings)

    try:
        alignment = normal_alignment(phi, set_eps, set_lam, rep.joint)
    except UndefinedDiagnosticError as exc:
        alignment = None
        notes.append(f"normal_alignment undefined at the joint projection: {exc}")

    master = None
    v = cfg.verification
    box = (v.box_lo, v.box_hi) if v.box_lo is not None and v.box_hi is not None else None
    try:
        pts = sample_feasible(phi, Intersection((set_eps, set_lam)), v.n_samples, np.random.default_rng(cfg.seed),
                              box=box)
        check = decomposition.verify_master(phi, rep, pts)
        master = {"n_samples": len(pts), "min_slack": check.min_slack, "violations": check.violations}
    except SamplingError as exc:
        notes.append(f"master inequality not checked: {exc}")

    ncx = _delta_ncx(cfg, rep.g2, rep.g1)
    results = {
        "decomposition": rep.to_dict(),
        "normal_alignment": alignment,
        "master_check": master,
        **_summary(cfg, rep.g1, rep.g2, rep.g12, ncx),
    }
    s = results
    table = Table(
        ["g2", "g1", "g12", "total", "orthogonality_residual", "orthogonal", "lb_safe", "penalty_ratio", "verdict"],
        [[rep.g2, rep.g1, rep.g12, rep.total, rep.orthogonality_residual, rep.orthogonal, s["lb_safe"],
          s["penalty_ratio"], s["verdict"]]],
    )
    return Report({"results": results}, {"components": table})


def _estimate_block(frame: empirical.SampleFrame, cfg: RunConfig, notes: list) -> tuple[dict, dict]:
    est_cfg = cfg.estimation
    convention = est_cfg.convention
    if convention is None:
        convention = "sequential"
        notes.append(CONVENTION_NOTICE)
    table = empirical.build_regime_table(frame, est_cfg.trunc_c, est_cfg.estimator)
    comps = empirical.estimate_components(table, convention, est_cfg.delta_sutva)

    ci = None
    if frame.n_clusters >= 2:
        ci = {
            name: list(empirical.cluster_bootstrap(
                frame, name, est_cfg.n_boot, est_cfg.confidence, cfg.seed, convention,
                trunc_c=est_cfg.trunc_c, estimator=est_cfg.estimator))
            for name in ("g1", "g2", "g12")
        }
    else:
        notes.append("only one cluster: bootstrap intervals are undefined and were skipped")

    bias = None
    delta_emp_auto = 0.0
    if est_cfg.y_sup is not None:
        bias = {}
        for r in empirical.REGIMES:
            part = frame.regime_slice(r)
            c = table.diagnostics[r].trunc_threshold
            bias[r] = empirical.truncation_bias_bound(part, c, est_cfg.y_sup, est_cfg.tail_kappa)
        # every regime loss enters the reported bound with coefficient at most 2
        delta_emp_auto = 2.0 * sum(bias.values())

    g12c = comps.g12_clipped
    ncx = _delta_ncx(cfg, comps.g2_hat, comps.g1_hat, delta_emp_auto)
    doc = {
        "regime_table": table.to_dict(),
        "components": comps.to_dict(),
        "bootstrap": None if ci is None else {"ci": ci, "n_boot": est_cfg.n_boot,
                                              "confidence": est_cfg.confidence},
        "ess_guardrail": empirical.ess_guardrail(table, est_cfg.min_ess),
        "truncation_bias_bound": bias,
        **_summary(cfg, comps.g1_hat, comps.g2_hat, g12c, ncx),
    }
    regime_rows = [
        [r, d.n, table.loss(r), d.untruncated_estimate, d.ess, d.clipping_pct, d.trunc_threshold]
        for r, d in table.diagnostics.items()
    ]
    flat = comps.to_dict()
    comp_cols = ["convention", "g1_hat", "g2_hat", "g12_hat", "g12_clipped", "lower_bound", "lb_safe",
                 "penalty_ratio", "verdict", "ess_guardrail"]
    comp_row = [flat["convention"], comps.g1_hat, comps.g2_hat, comps.g12_hat, g12c, comps.lower_bound,
                doc["lb_safe"], doc["penalty_ratio"], doc["verdict"], doc["ess_guardrail"]]
    if ci is not None:
        for name in ("g1", "g2", "g12"):
            comp_cols += [f"ci_{name}_lo", f"ci_{name}_hi"]
            comp_row += ci[name]
    tables = {
        "regime_table": Table(["regime", "n", "estimate", "untruncated_estimate", "ess", "clipping_pct",
                               "trunc_threshold"], regime_rows),
        "components": Table(comp_cols, [comp_row]),
    }
    return doc, tables


def _run_estimate(cfg: RunConfig, notes: list) -> Report:
    frame = empirical.read_samples_csv(cfg.samples_csv)
    doc, tables = _estimate_block(frame, cfg, notes)
    doc["n_samples"] = len(frame)
    doc["n_clusters"] = frame.n_clusters
    return Report({"results": doc}, tables)


def _run_simulate(cfg: RunConfig, notes: list) -> Report:
    frame = simulate_2x2(cfg.dgp, cfg.seed)
    doc, tables = _estimate_block(frame, cfg, notes)
    doc["targets"] = dgp_targets(cfg.dgp)
    doc["lam"] = cfg.dgp.lam
    samples = Table(
        list(empirical.SAMPLE_COLUMNS),
        [[empirical.REGIMES[g], y, 1.0, 1.0, "", int(c)]
         for g, y, c in zip(frame.regime, frame.y.tolist(), frame.cluster_labels[frame.cluster])],
    )
    return Report({"results": doc}, {"samples": samples, **tables})


def _run_calibrate(cfg: RunConfig, notes: list) -> Report:
    obs = calibration.read_graded_csv(cfg.graded_csv)
    surf = calibration.fit_penalty_surfaces(obs)
    grid = surf.interaction_residual
    rows = [[float(l), float(e), float(grid.values[i, j])]
            for i, l in enumerate(grid.lams) for j, e in enumerate(grid.epss)
            if not math.isnan(grid.values[i, j])]
    return Report(
        {"results": {
            "g1_curve": surf.g1_curve.to_dict(),
            "g2_curve": surf.g2_curve.to_dict(),
            "interaction_residual": grid.to_dict(),
            "n_observations": len(obs),
        }},
        {
            "interaction_residual": Table(["lam", "eps", "residual"], rows),
            "g1_curve": Table(["lam", "g1"], [[float(k), float(v)] for k, v in
                                              zip(surf.g1_curve.knots, surf.g1_curve.values)]),
            "g2_curve": Table(["eps", "g2"], [[float(k), float(v)] for k, v in
                                              zip(surf.g2_curve.knots, surf.g2_curve.values)]),
        },
    )


def _run_gaussian_demo(cfg: RunConfig, notes: list) -> Report:
    table = gaussian_curves(cfg.toy)
    return Report(
        {"results": {"curves": {c: [row[i] for row in table.rows] for i, c in enumerate(table.columns)}}},
        {"curves": table},
    )


_RUNNERS = {
    "gaussian-demo": _run_gaussian_demo,
    "decompose": _run_decompose,
    "estimate": _run_estimate,
    "calibrate": _run_calibrate,
    "simulate": _run_simulate,
}


def run_pipeline(cfg: RunConfig) -> Report:
    """Run one mode and assemble the report.

    Warnings raised along the way are captured into the report's
    ``warnings`` list rather than printed.
    """
    notes: list = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report = _RUNNERS[cfg.mode](cfg, notes)
    for w in caught:
        notes.append(f"{w.category.__name__}: {w.message}")
    seen = []
    for n in notes:
        if n not in seen:
            seen.append(n)
    report.document = {
        "schema_version": SCHEMA_VERSION,
        "mode": cfg.mode,
        "seed": cfg.seed,
        "inputs": {k: v for k, v in cfg.to_dict().items() if k != "output"},
        "warnings": seen,
        **report.document,
    }
    return report


def write_report(report: Report, out_dir, fmt: str = "json") -> list[Path]:
    """Write ``report.json`` and, for ``fmt="csv"``, one CSV per table.

    Simulated samples are always written, since they are the run's product.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "report.json"]
    written[0].write_text(report.to_json())
    for name, table in report.tables.items():
        if fmt == "csv" or name == "samples":
            path = out / f"{name}.csv"
            with open(path, "w", newline="") as fh:
                table.to_csv(fh)
            written.append(path)
    return written
