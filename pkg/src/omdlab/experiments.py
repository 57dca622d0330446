"""Config-driven experiment pipelines: certify, run every regularizer arm, evaluate,
and write CSV traces plus accumulated-cost curves."""

from __future__ import annotations

import csv
import io
import os
import re
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .costs import (CostSequence, SmoothnessCertificate, certify_relative_smoothness,
                    doptimal_sequence, poisson_sequence, synthetic_sequence)
from .errors import ConfigError, ConvergenceWarning
from .geometry import FeasibleSet, NormKind, PositiveBox, TruncatedSimplex, diameter
from .omd import OmdConfig, comparator_sequence, run_omd, write_trajectory_csv
from .regret import (RegularityMeasures, analytic_functional_variation,
                     analytic_gradient_variation, evaluate_run, functional_variation,
                     gradient_variation, path_length)
from .regularizers import BregmanConstants, bregman_constants, make

EXPERIMENTS = ("doptimal", "poisson", "synthetic")
REGULARIZERS = ("burg", "kl", "l2sq", "l1sq")
DEFAULT_REGULARIZERS = {
    "doptimal": ("burg", "kl", "l1sq"),
    "poisson": ("burg", "kl", "l1sq"),
    "synthetic": ("burg", "kl", "l2sq", "l1sq"),
}
DEFAULT_M = {"doptimal": 5, "poisson": 150, "synthetic": 0}
FULL_SCALE_M = {"doptimal": 5, "poisson": 1500, "synthetic": 0}
THREADS_ENV = "OMD_LAB_THREADS"

# keys whose defaults are choices of this tool rather than settings of the experiments
# being reproduced; summary.txt flags them when they were not given explicitly
FLAGGED_DEFAULTS = ("T", "eta_mode", "box_lower", "box_upper", "pool_size", "comparator")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    T: int = 100
    m: int | None = None
    d: int = 10
    regularizers: tuple = ()
    eta_mode: str = "one_over_beta"
    eta: float | None = None
    comparator: str = "per_round_min"
    comparator_path: str | None = None
    epsilon: float = 1e-6
    seed: int = 42
    sup_samples: int = 2000
    certify_samples: int = 2000
    output_dir: str = "omd_out"
    full_scale: bool = False
    pool_size: int = 10
    drift: float = 0.01
    box_lower: float = 1e-3
    box_upper: float = 10.0
    explicit: frozenset = field(default=frozenset(), compare=False)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {', '.join(EXPERIMENTS)}")
        if not self.regularizers:
            object.__setattr__(self, "regularizers", DEFAULT_REGULARIZERS[self.experiment])
        regs = tuple(self.regularizers)
        object.__setattr__(self, "regularizers", regs)
        if self.m is None:
            table = FULL_SCALE_M if self.full_scale else DEFAULT_M
            object.__setattr__(self, "m", table[self.experiment])
        self.validate()

    def validate(self):
        bad = [r for r in self.regularizers if r not in REGULARIZERS]
        if bad:
            raise ConfigError(f"unknown regularizers: {', '.join(bad)}")
        if len(set(self.regularizers)) != len(self.regularizers):
            raise ConfigError("regularizers must not repeat")
        if self.T < 1:
            raise ConfigError("T must be >= 1")
        if self.d < 1 or (self.experiment != "synthetic" and self.m < 1):
            raise ConfigError("m and d must be >= 1")
        if not 0 < self.epsilon < 1.0 / self.d:
            raise ConfigError(f"epsilon must lie in (0, 1/d) = (0, {1.0 / self.d:g})")
        if self.eta_mode not in ("one_over_beta", "manual"):
            raise ConfigError("eta_mode must be one_over_beta or manual(<value>)")
        if self.eta_mode == "manual" and not (self.eta is not None and self.eta > 0):
            raise ConfigError("manual eta must be positive")
        if self.comparator not in ("per_round_min", "fixed_hindsight", "file"):
            raise ConfigError("comparator must be per_round_min, fixed_hindsight or file(<path>)")
        if self.comparator == "file" and not self.comparator_path:
            raise ConfigError("comparator file(<path>) needs a path")
        if self.sup_samples < 1 or self.certify_samples < 1:
            raise ConfigError("sample counts must be >= 1")
        if self.pool_size < 1:
            raise ConfigError("pool_size must be >= 1")
        if self.drift < 0:
            raise ConfigError("drift must be nonnegative")
        if not 0 < self.box_lower < self.box_upper:
            raise ConfigError("need 0 < box_lower < box_upper")

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        if not kw:
            return self
        if kw.get("full_scale") and "m" not in self.explicit:
            kw["m"] = FULL_SCALE_M[self.experiment]
        return replace(self, explicit=self.explicit | set(kw), **kw)

    def feasible_set(self) -> FeasibleSet:
        if self.experiment == "poisson":
            return PositiveBox.uniform(self.d, self.box_lower, self.box_upper)
        return TruncatedSimplex(self.d, self.epsilon)


# -- config files ------------------------------------------------------------------

_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)\s*$")
_CALL = re.compile(r"^(\w+)\((.*)\)$")
_INT_KEYS = ("T", "m", "d", "seed", "sup_samples", "certify_samples", "pool_size")
_FLOAT_KEYS = ("epsilon", "drift", "box_lower", "box_upper")
_KEYS = ("experiment", "regularizers", "eta_mode", "comparator", "output_dir", "full_scale",
         *_INT_KEYS, *_FLOAT_KEYS)


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    raw, lines = {}, {}
    for no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0]
        if not line.strip():
            continue
        hit = _LINE.match(line)
        if not hit or not hit.group(2):
            raise ConfigError(f"{source}:{no}: malformed line {line.strip()!r}")
        key, value = hit.groups()
        if key in raw:
            raise ConfigError(f"{source}:{no}: duplicate key {key!r}")
        raw[key], lines[key] = value, no
    unknown = sorted(set(raw) - set(_KEYS))
    if unknown:
        raise ConfigError(f"{source}: unknown keys: {', '.join(unknown)}")
    if "experiment" not in raw:
        raise ConfigError(f"{source}: missing required key 'experiment'")

    kw = {}
    for key, value in raw.items():
        try:
            kw.update(_convert(key, value))
        except ValueError as exc:
            raise ConfigError(f"{source}:{lines[key]}: bad value for {key}: {exc}") from None
    return ExperimentConfig(**kw, explicit=frozenset(raw))


def _convert(key: str, value: str) -> dict:
    if key in _INT_KEYS:
        return {key: int(value)}
    if key in _FLOAT_KEYS:
        return {key: float(value)}
    if key == "full_scale":
        if value.lower() not in ("true", "false"):
            raise ValueError("expected true or false")
        return {key: value.lower() == "true"}
    if key == "regularizers":
        regs = tuple(v.strip() for v in value.split(",") if v.strip())
        if not regs:
            raise ValueError("empty list")
        return {key: regs}
    if key == "eta_mode":
        call = _CALL.match(value)
        if call and call.group(1) == "manual":
            return {"eta_mode": "manual", "eta": float(call.group(2))}
        return {"eta_mode": value}
    if key == "comparator":
        call = _CALL.match(value)
        if call and call.group(1) == "file":
            return {"comparator": "file", "comparator_path": call.group(2).strip()}
        return {"comparator": value}
    return {key: value}


def parse_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, str(path))


def serialize_config(cfg: ExperimentConfig) -> str:
    out = []
    for f in fields(cfg):
        name, v = f.name, getattr(cfg, f.name)
        if name in ("explicit", "eta", "comparator_path"):
            continue
        if name == "regularizers":
            v = ", ".join(v)
        elif name == "eta_mode" and v == "manual":
            v = f"manual({cfg.eta!r})"
        elif name == "comparator" and v == "file":
            v = f"file({cfg.comparator_path})"
        elif isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, float):
            v = repr(v)
        out.append(f"{name} = {v}")
    return "\n".join(out) + "\n"


# -- pipeline ----------------------------------------------------------------------


@dataclass(frozen=True)
class ArmCertificate:
    regularizer: str
    geometry: str
    cert: SmoothnessCertificate
    consts: BregmanConstants
    M: float

    def row(self) -> list:
        return [self.regularizer, self.geometry, self.cert.beta, self.cert.lambda_,
                self.consts.gamma, self.consts.R, self.M]


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    curves: dict                      # regularizer -> prefix sums of f_t(x_t)
    reports: dict                     # regularizer -> RegretReport
    trajectories: dict                # regularizer -> Trajectory
    certificates: dict                # regularizer -> ArmCertificate
    comparators: np.ndarray
    notes: list

    def ranking(self) -> list[str]:
        return sorted(self.curves, key=lambda r: self.curves[r][-1])


def build_costs(cfg: ExperimentConfig) -> CostSequence:
    if cfg.experiment == "doptimal":
        return doptimal_sequence(cfg.T, cfg.m, cfg.d, cfg.pool_size, seed=cfg.seed)
    if cfg.experiment == "poisson":
        return poisson_sequence(cfg.T, cfg.m, cfg.d, seed=cfg.seed)
    return synthetic_sequence(cfg.T, cfg.feasible_set(), drift=cfg.drift, seed=cfg.seed)


def certify_arm(c: CostSequence, name: str, fset: FeasibleSet, cfg: ExperimentConfig) -> ArmCertificate:
    r = make(name, cfg.d)
    geo = r.effective(fset)
    cert = certify_relative_smoothness(c, geo, fset, cfg.certify_samples, cfg.seed)
    consts = bregman_constants(geo, fset, cfg.certify_samples, cfg.seed)
    return ArmCertificate(name, geo.name, cert, consts, diameter(fset, geo.primal_norm))


def certify_experiment(cfg: ExperimentConfig) -> list[ArmCertificate]:
    c, fset = build_costs(cfg), cfg.feasible_set()
    return [certify_arm(c, name, fset, cfg) for name in cfg.regularizers]


def _comparators(c: CostSequence, fset: FeasibleSet, cfg: ExperimentConfig, notes: list):
    if cfg.comparator == "file":
        return comparator_sequence(c, "from_file", fset=fset, path=cfg.comparator_path)
    # one comparator sequence shared by every arm, computed in a fixed geometry
    name = "l2sq" if cfg.experiment == "synthetic" else "burg"
    arm = certify_arm(c, name, fset, cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        U = comparator_sequence(c, cfg.comparator, make(name, cfg.d), fset, 1.0 / arm.cert.beta)
    notes.extend(f"comparator: {w.message}" for w in caught if issubclass(w.category, ConvergenceWarning))
    return U


def _threads(n_arms: int) -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return max(1, n_arms)
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer") from None
    return max(1, min(n, n_arms))


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Certify, run and evaluate every regularizer arm of ``cfg``.

    Arms run concurrently (capped by ``OMD_LAB_THREADS``); results are assembled in
    config order and all files are written at the end, so outputs do not depend on
    scheduling.
    """
    c, fset = build_costs(cfg), cfg.feasible_set()
    notes = []
    U = _comparators(c, fset, cfg, notes)
    fixed = cfg.comparator == "fixed_hindsight"

    # V_T does not depend on the arm, G_T only through the dual norm
    V_T = functional_variation(c, fset, cfg.sup_samples, cfg.seed)
    V_an = analytic_functional_variation(c, fset)
    G_cache = {}

    def measures(norm: NormKind) -> RegularityMeasures:
        if norm not in G_cache:
            G_cache[norm] = (gradient_variation(c, fset, norm.dual, cfg.sup_samples, cfg.seed),
                             analytic_gradient_variation(c, norm.dual))
        G_T, G_an = G_cache[norm]
        return RegularityMeasures(path_length(U, norm), V_T, G_T, norm, cfg.sup_samples,
                                  cfg.seed, V_an, G_an)

    norms_needed = {make(n, cfg.d).effective(fset).primal_norm for n in cfg.regularizers}
    for norm in sorted(norms_needed, key=lambda k: k.value):
        measures(norm)

    def arm(name: str):
        ac = certify_arm(c, name, fset, cfg)
        eta = 1.0 / ac.cert.beta if cfg.eta_mode == "one_over_beta" else cfg.eta
        r = make(name, cfg.d)
        traj = run_omd(c, OmdConfig(eta, r, fset))
        meas = measures(r.effective(fset).primal_norm)
        report = evaluate_run(traj, c, U, ac.cert, ac.consts, fset, meas,
                              u_star=U[0] if fixed else None, static_comparator=fixed)
        return ac, traj, report

    names = cfg.regularizers
    with ThreadPoolExecutor(max_workers=_threads(len(names))) as pool:
        outcomes = list(pool.map(arm, names))

    result = ExperimentResult(
        config=cfg,
        curves={n: np.cumsum(o[1].costs) for n, o in zip(names, outcomes)},
        reports={n: o[2] for n, o in zip(names, outcomes)},
        trajectories={n: o[1] for n, o in zip(names, outcomes)},
        certificates={n: o[0] for n, o in zip(names, outcomes)},
        comparators=U,
        notes=notes,
    )
    if write:
        write_outputs(result, cfg.output_dir)
    return result


# -- outputs -----------------------------------------------------------------------


def curves_csv(curves: dict) -> str:
    names = list(curves)
    lengths = {len(curves[n]) for n in names}
    if len(lengths) != 1:
        raise ValueError("curves must have equal lengths")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["round", *names])
    for t in range(lengths.pop()):
        w.writerow([t + 1, *(repr(float(curves[n][t])) for n in names)])
    return buf.getvalue()


def emit_curves(curves: dict, path) -> None:
    Path(path).write_text(curves_csv(curves), encoding="utf-8")


def summary_text(res: ExperimentResult) -> str:
    cfg = res.config
    lines = [f"experiment {cfg.experiment}: T={cfg.T} m={cfg.m} d={cfg.d} seed={cfg.seed}"]
    flagged = [k for k in FLAGGED_DEFAULTS if k not in cfg.explicit]
    if flagged:
        lines.append("defaults chosen by this tool (not given in the config): "
                     + ", ".join(f"{k}={_show(cfg, k)}" for k in flagged))
    lines.append("initial point: center of the feasible set for every arm")
    if cfg.experiment == "poisson":
        lines.append(f"feasible set: box [{cfg.box_lower:g}, {cfg.box_upper:g}]^{cfg.d}")
    else:
        lines.append(f"feasible set: simplex truncated at epsilon={cfg.epsilon:g}")
    lines.append("")
    lines.append("final accumulated cost:")
    for name in res.ranking():
        lines.append(f"  {name:<5} {res.curves[name][-1]:.6f}")
    lines.append("")
    for name in cfg.regularizers:
        lines.append(res.reports[name].summary())
    if res.notes:
        lines.append("")
        lines.extend(res.notes)
    return "\n".join(lines) + "\n"


def _show(cfg, key):
    if key == "eta_mode" and cfg.eta_mode == "manual":
        return f"manual({cfg.eta:g})"
    return getattr(cfg, key)


def write_outputs(res: ExperimentResult, directory) -> None:
    """Write every output file; the whole run is serialized through this one call."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    emit_curves(res.curves, out / "curve.csv")
    for name in res.config.regularizers:
        write_trajectory_csv(res.trajectories[name], out / f"trajectory_{name}.csv")
        (out / f"report_{name}.csv").write_text(res.reports[name].to_csv(), encoding="utf-8")
    (out / "summary.txt").write_text(summary_text(res), encoding="utf-8")


def certificates_csv(arms: list[ArmCertificate]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["regularizer", "geometry", "beta", "lambda", "gamma", "R", "M"])
    for a in arms:
        w.writerow([a.regularizer, a.geometry, *(repr(float(v)) for v in a.row()[2:])])
    return buf.getvalue()


def verify_experiment(cfg: ExperimentConfig, triples: int = 1000):
    """Run every arm and the full check suite; returns a list of ``CheckResult``."""
    from . import checks

    res = run_experiment(cfg, write=False)
    c, fset = build_costs(cfg), cfg.feasible_set()
    rng = np.random.default_rng([cfg.seed, 3])
    X, Y, Z = (fset.sample(triples, rng) for _ in range(3))
    out = []
    for name in cfg.regularizers:
        traj = res.trajectories[name]
        geo = traj.regularizer.effective(fset)
        gamma = res.certificates[name].consts.gamma
        out += [
            checks.three_point_identity(geo, X, Y, Z),
            checks.optimality_residual(traj, fset, seed=cfg.seed),
            checks.descent_inequality(traj, c, fset, seed=cfg.seed),
            checks.bregman_lipschitz(traj, res.comparators, gamma, fset),
            checks.telescoping(traj, res.comparators, fset),
        ]
    return out
