"""Run configuration: a JSON document validated into dataclasses.

Every field is optional except where a mode needs it; errors name the
offending field by its dotted path (``config.dgp.n``).  The layout is
documented in ``README.md`` and mirrored one-to-one by the dataclasses
below.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError

MODES = ("gaussian-demo", "decompose", "estimate", "calibrate", "simulate")
FORMATS = ("json", "csv")


@dataclass(frozen=True)
class LamGrid:
    start: float = 0.0
    stop: float = 2.0
    points: int = 200


@dataclass(frozen=True)
class ToyConfig:
    sigma2: float = 1.0
    rho_toy: float = 0.5
    lam_grid: LamGrid = field(default_factory=LamGrid)
    eps_list: tuple = (0.0, 0.5, 1.0)


@dataclass(frozen=True)
class DGPConfig:
    mu: float = 0.0
    sigma2: float = 1.0
    lam_noise: float = 0.5
    eps_shift: float = 0.5
    interaction_corr: float = 0.0
    n: int = 10_000
    n_clusters: int = 100
    # alternative to lam_noise: latency tau over decision interval Delta
    tau: float | None = None
    Delta: float | None = None

    @property
    def lam(self) -> float:
        return self.tau / self.Delta if self.tau is not None else self.lam_noise


@dataclass(frozen=True)
class ProjectionConfig:
    max_iterations: int = 10_000
    tolerance: float = 1e-9
    interior_margin: float = 1e-12


@dataclass(frozen=True)
class VerificationConfig:
    n_samples: int = 1000
    box_lo: tuple | None = None
    box_hi: tuple | None = None


@dataclass(frozen=True)
class ZetaConfig:
    rho: float
    alpha: float
    c_const: float
    kappa_hat: float
    d_lam: float
    d_eps: float


@dataclass(frozen=True)
class RobustConfig:
    delta_relax: float = 0.0
    delta_emp: float = 0.0
    zeta: float | ZetaConfig = 0.0
    ratio_eps: float = 1e-9


@dataclass(frozen=True)
class EstimationConfig:
    convention: str | None = None
    estimator: str = "ipw"
    trunc_c: float | None = None
    n_boot: int = 1000
    confidence: float = 0.95
    delta_sutva: float | None = None
    min_ess: float = 100.0
    y_sup: float | None = None
    tail_kappa: float | None = None


@dataclass(frozen=True)
class OutputConfig:
    dir: str | None = None
    format: str = "json"


@dataclass(frozen=True)
class RunConfig:
    mode: str
    seed: int = 0
    potential: dict | None = None
    sets: dict | None = None
    p_star: tuple | None = None
    hull_is_exact: bool | None = None
    projection: ProjectionConfig = field(default_factory=ProjectionConfig)
    verification: VerificationConfig = field(default_factory=VerificationConfig)
    robust: RobustConfig = field(default_factory=RobustConfig)
    estimation: EstimationConfig = field(default_factory=EstimationConfig)
    toy: ToyConfig = field(default_factory=ToyConfig)
    dgp: DGPConfig = field(default_factory=DGPConfig)
    samples_csv: str | None = None
    graded_csv: str | None = None
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self) -> dict:
        return asdict(self)


# -- validation helpers ----------------------------------------------------


def _fail(path, msg):
    raise ConfigError(f"{path}: {msg}")


def _num(v, path, *, lo=None, hi=None, lo_open=False, optional=False):
    if v is None and optional:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        _fail(path, f"expected a finite number, got {v!r}")
    v = float(v)
    if lo is not None and (v < lo or (lo_open and v == lo)):
        _fail(path, f"must be {'>' if lo_open else '>='} {lo}, got {v!r}")
    if hi is not None and v > hi:
        _fail(path, f"must be <= {hi}, got {v!r}")
    return v


def _int(v, path, *, lo=None, optional=False):
    if v is None and optional:
        return None
    if isinstance(v, bool) or not isinstance(v, int):
        _fail(path, f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        _fail(path, f"must be >= {lo}, got {v!r}")
    return v


def _str(v, path, choices=None, optional=False):
    if v is None and optional:
        return None
    if not isinstance(v, str):
        _fail(path, f"expected a string, got {v!r}")
    if choices is not None and v not in choices:
        _fail(path, f"must be one of {list(choices)}, got {v!r}")
    return v


def _numlist(v, path, optional=False):
    if v is None and optional:
        return None
    if not isinstance(v, list) or not v:
        _fail(path, f"expected a nonempty list of numbers, got {v!r}")
    return tuple(_num(x, f"{path}[{i}]") for i, x in enumerate(v))


def _section(raw, key, path, allowed):
    sub = raw.get(key, {})
    if sub is None:
        sub = {}
    if not isinstance(sub, dict):
        _fail(f"{path}.{key}", "expected an object")
    unknown = set(sub) - set(allowed)
    if unknown:
        _fail(f"{path}.{key}", f"unknown field(s) {sorted(unknown)}; allowed: {sorted(allowed)}")
    return sub


def _toy(raw, path) -> ToyConfig:
    sub = _section(raw, "toy", path, ("sigma2", "rho_toy", "lam_grid", "eps_list"))
    p = f"{path}.toy"
    grid = _section(sub, "lam_grid", p, ("start", "stop", "points"))
    g = LamGrid(
        _num(grid.get("start", 0.0), f"{p}.lam_grid.start"),
        _num(grid.get("stop", 2.0), f"{p}.lam_grid.stop"),
        _int(grid.get("points", 200), f"{p}.lam_grid.points", lo=2),
    )
    if g.stop <= g.start:
        _fail(f"{p}.lam_grid", "stop must exceed start")
    eps = _numlist(sub.get("eps_list", [0.0, 0.5, 1.0]), f"{p}.eps_list")
    for i, e in enumerate(eps):
        if e < 0:
            _fail(f"{p}.eps_list[{i}]", "must be >= 0")
    return ToyConfig(
        _num(sub.get("sigma2", 1.0), f"{p}.sigma2", lo=0, lo_open=True),
        _num(sub.get("rho_toy", 0.5), f"{p}.rho_toy", lo=0, hi=1),
        g,
        eps,
    )


def _dgp(raw, path) -> DGPConfig:
    fields = ("mu", "sigma2", "lam_noise", "eps_shift", "interaction_corr", "n", "n_clusters", "tau", "Delta")
    sub = _section(raw, "dgp", path, fields)
    p = f"{path}.dgp"
    d = DGPConfig()
    tau = _num(sub.get("tau"), f"{p}.tau", lo=0, optional=True)
    delta = _num(sub.get("Delta"), f"{p}.Delta", lo=0, lo_open=True, optional=True)
    if (tau is None) != (delta is None):
        _fail(p, "tau and Delta must be given together")
    if tau is not None and "lam_noise" in sub:
        _fail(p, "give either lam_noise or (tau, Delta), not both")
    return DGPConfig(
        mu=_num(sub.get("mu", d.mu), f"{p}.mu"),
        sigma2=_num(sub.get("sigma2", d.sigma2), f"{p}.sigma2", lo=0, lo_open=True),
        lam_noise=_num(sub.get("lam_noise", d.lam_noise), f"{p}.lam_noise", lo=0),
        eps_shift=_num(sub.get("eps_shift", d.eps_shift), f"{p}.eps_shift"),
        interaction_corr=_num(sub.get("interaction_corr", d.interaction_corr), f"{p}.interaction_corr", lo=-1, hi=1),
        n=_int(sub.get("n", d.n), f"{p}.n", lo=1),
        n_clusters=_int(sub.get("n_clusters", d.n_clusters), f"{p}.n_clusters", lo=1),
        tau=tau,
        Delta=delta,
    )


def _estimation(raw, path) -> EstimationConfig:
    fields = ("convention", "estimator", "trunc_c", "n_boot", "confidence", "delta_sutva", "min_ess", "y_sup",
              "tail_kappa")
    sub = _section(raw, "estimation", path, fields)
    p = f"{path}.estimation"
    return EstimationConfig(
        convention=_str(sub.get("convention"), f"{p}.convention", ("sequential", "baseline"), optional=True),
        estimator=_str(sub.get("estimator", "ipw"), f"{p}.estimator", ("ipw", "dr")),
        trunc_c=_num(sub.get("trunc_c"), f"{p}.trunc_c", lo=1, optional=True),
        n_boot=_int(sub.get("n_boot", 1000), f"{p}.n_boot", lo=100),
        confidence=_num(sub.get("confidence", 0.95), f"{p}.confidence", lo=0, lo_open=True, hi=0.999999),
        delta_sutva=_num(sub.get("delta_sutva"), f"{p}.delta_sutva", lo=0, optional=True),
        min_ess=_num(sub.get("min_ess", 100.0), f"{p}.min_ess", lo=0, lo_open=True),
        y_sup=_num(sub.get("y_sup"), f"{p}.y_sup", lo=0, optional=True),
        tail_kappa=_num(sub.get("tail_kappa"), f"{p}.tail_kappa", lo=0, optional=True),
    )


def _robust(raw, path) -> RobustConfig:
    sub = _section(raw, "robust", path, ("delta_relax", "delta_emp", "zeta", "ratio_eps"))
    p = f"{path}.robust"
    zeta = sub.get("zeta", 0.0)
    if isinstance(zeta, dict):
        keys = ("rho", "alpha", "c_const", "kappa_hat", "d_lam", "d_eps")
        missing = set(keys) - set(zeta)
        if missing:
            _fail(f"{p}.zeta", f"missing field(s) {sorted(missing)} (no defaults: all are problem-dependent)")
        _section(sub, "zeta", p, keys)
        zeta = ZetaConfig(
            rho=_num(zeta["rho"], f"{p}.zeta.rho", lo=0),
            alpha=_num(zeta["alpha"], f"{p}.zeta.alpha", lo=0, lo_open=True),
            c_const=_num(zeta["c_const"], f"{p}.zeta.c_const", lo=0),
            kappa_hat=_num(zeta["kappa_hat"], f"{p}.zeta.kappa_hat", lo=0),
            d_lam=_num(zeta["d_lam"], f"{p}.zeta.d_lam"),
            d_eps=_num(zeta["d_eps"], f"{p}.zeta.d_eps"),
        )
    else:
        zeta = _num(zeta, f"{p}.zeta", lo=0)
    return RobustConfig(
        delta_relax=_num(sub.get("delta_relax", 0.0), f"{p}.delta_relax", lo=0),
        delta_emp=_num(sub.get("delta_emp", 0.0), f"{p}.delta_emp", lo=0),
        zeta=zeta,
        ratio_eps=_num(sub.get("ratio_eps", 1e-9), f"{p}.ratio_eps", lo=0, lo_open=True),
    )


TOP_LEVEL = ("mode", "seed", "potential", "sets", "p_star", "hull_is_exact", "projection", "verification", "robust",
             "estimation", "toy", "dgp", "samples_csv", "graded_csv", "output", "schema_version")


def parse_config(raw: Any, mode: str | None = None, path: str = "config") -> RunConfig:
    """Validate a decoded JSON object.  ``mode`` overrides ``raw["mode"]``."""
    if not isinstance(raw, dict):
        _fail(path, "top level must be an object")
    unknown = set(raw) - set(TOP_LEVEL)
    if unknown:
        _fail(path, f"unknown field(s) {sorted(unknown)}")
    mode = _str(mode if mode is not None else raw.get("mode"), f"{path}.mode", MODES)
    seed = _int(raw.get("seed", 0), f"{path}.seed", lo=0)

    potential = raw.get("potential")
    if potential is not None:
        if not isinstance(potential, dict):
            _fail(f"{path}.potential", "expected an object")
        _str(potential.get("kind"), f"{path}.potential.kind",
             ("squared_euclidean", "negative_entropy", "gaussian_natural"))
    sets = raw.get("sets")
    if sets is not None:
        if not isinstance(sets, dict) or set(sets) != {"eps", "lam"}:
            _fail(f"{path}.sets", "expected an object with exactly the keys 'eps' and 'lam'")
    p_star = _numlist(raw.get("p_star"), f"{path}.p_star", optional=True)
    hull = raw.get("hull_is_exact")
    if hull is not None and not isinstance(hull, bool):
        _fail(f"{path}.hull_is_exact", "expected true/false")

    proj = _section(raw, "projection", path, ("max_iterations", "tolerance", "interior_margin"))
    projection = ProjectionConfig(
        _int(proj.get("max_iterations", 10_000), f"{path}.projection.max_iterations", lo=1),
        _num(proj.get("tolerance", 1e-9), f"{path}.projection.tolerance", lo=0, lo_open=True),
        _num(proj.get("interior_margin", 1e-12), f"{path}.projection.interior_margin", lo=0),
    )
    ver = _section(raw, "verification", path, ("n_samples", "box_lo", "box_hi"))
    verification = VerificationConfig(
        _int(ver.get("n_samples", 1000), f"{path}.verification.n_samples", lo=1),
        _numlist(ver.get("box_lo"), f"{path}.verification.box_lo", optional=True),
        _numlist(ver.get("box_hi"), f"{path}.verification.box_hi", optional=True),
    )
    out = _section(raw, "output", path, ("dir", "format"))
    output = OutputConfig(
        _str(out.get("dir"), f"{path}.output.dir", optional=True),
        _str(out.get("format", "json"), f"{path}.output.format", FORMATS),
    )
    cfg = RunConfig(
        mode=mode,
        seed=seed,
        potential=potential,
        sets=sets,
        p_star=p_star,
        hull_is_exact=hull,
        projection=projection,
        verification=verification,
        robust=_robust(raw, path),
        estimation=_estimation(raw, path),
        toy=_toy(raw, path),
        dgp=_dgp(raw, path),
        samples_csv=_str(raw.get("samples_csv"), f"{path}.samples_csv", optional=True),
        graded_csv=_str(raw.get("graded_csv"), f"{path}.graded_csv", optional=True),
        output=output,
    )
    _require_mode_fields(cfg, path)
    return cfg


def _require_mode_fields(cfg: RunConfig, path: str):
    if cfg.mode == "decompose":
        for name in ("potential", "sets", "p_star"):
            if getattr(cfg, name) is None:
                _fail(f"{path}.{name}", "required for mode 'decompose'")
    elif cfg.mode == "estimate" and cfg.samples_csv is None:
        _fail(f"{path}.samples_csv", "required for mode 'estimate'")
    elif cfg.mode == "calibrate" and cfg.graded_csv is None:
        _fail(f"{path}.graded_csv", "required for mode 'calibrate'")


def load_config(path, mode: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Read and validate a JSON config file.

    Syntax errors are reported with line and column.  ``overrides`` are
    merged into the top level before validation (used by CLI flags).
    Relative data paths are resolved against the config file's directory.
    """
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}, line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if isinstance(raw, dict):
        for key in ("samples_csv", "graded_csv"):
            if isinstance(raw.get(key), str) and not Path(raw[key]).is_absolute():
                raw[key] = str(p.parent / raw[key])
        raw.update(overrides or {})
    return parse_config(raw, mode=mode, path=str(path))
