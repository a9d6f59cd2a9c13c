"""Monte Carlo experiment driver: grids over (method, D, SNR), CSV export.

Per-trial seeds are split off the root seed by spawn keys derived from the
grid coordinates, so results are identical for any worker count and every
method sees the same (H, X, Z) instance within a trial (paired comparison).
"""

import functools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from . import baselines
from .baselines import TrialOutcome
from .constellation import make_constellation
from .errors import ConfigurationError, DivergenceError, JedError
from .model import (
    IidGaussianChannel,
    KroneckerChannel,
    SystemDims,
    exponential_correlation,
    forward,
    sample_channel,
    sample_symbols,
    sigma0_from_snr,
)
from .sampler import make_config, preset_name_for_snr, run_jed
from .scores import GaussianChannelPrior, LearnedChannelPrior
from .weights import load_score_weights

METHODS = ("jed", "ls", "lmmse", "mmse-csi", "ml-csi")

SNR_DEFINITION = "sigma0^2=n_users/10^(snr_db/10)"

CSV_COLUMNS = (
    "row_type", "method", "n_rx", "n_users", "n_pilots", "n_data", "order",
    "channel", "prior", "preset", "snr_db", "trial", "n_trials",
    "nmse", "nmse_db", "ser", "snr_def",
)


@dataclass(frozen=True)
class ExperimentSpec:
    n_rx: int
    n_users: int
    n_pilots: int
    d_values: tuple
    snr_dbs: tuple
    trials: int
    methods: tuple = ("jed",)
    order: int = 4
    channel: str = "iid"
    prior: str = "analytic:1.0"
    preset: str = "auto"
    levels: int = 300
    inner_steps: int = 3
    eps_x: float | None = None
    eps_h: float | None = None
    tau_x: float | None = None
    tau_h: float | None = None
    scale_steps: bool = True
    noise_coupling: str = "independent"
    seed: int = 0
    workers: int = 1
    out: str = "results.csv"

    def __post_init__(self):
        object.__setattr__(self, "d_values", tuple(int(d) for d in self.d_values))
        object.__setattr__(self, "snr_dbs", tuple(float(s) for s in self.snr_dbs))
        object.__setattr__(self, "methods", tuple(self.methods))
        if not self.d_values or not self.snr_dbs or not self.methods:
            raise ConfigurationError("d_values, snr_dbs, and methods must be non-empty")
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ConfigurationError(f"unknown methods {sorted(unknown)}; known: {METHODS}")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        _parse_channel(self.channel, self.n_rx, self.n_users)  # validate early
        _parse_prior_spec(self.prior)


def _parse_channel(spec: str, n_rx: int, n_users: int):
    if spec == "iid":
        return IidGaussianChannel()
    if spec.startswith("kron:"):
        parts = spec.split(":")
        if len(parts) != 3:
            raise ConfigurationError(f"kronecker channel spec must be kron:<rho_rx>:<rho_tx>, got {spec!r}")
        rho_rx, rho_tx = float(parts[1]), float(parts[2])
        return KroneckerChannel(
            r_rx=exponential_correlation(n_rx, rho_rx),
            r_tx=exponential_correlation(n_users, rho_tx),
        )
    raise ConfigurationError(f"unknown channel spec {spec!r} (expected iid or kron:<rho>:<rho>)")


def _parse_prior_spec(spec: str):
    if spec.startswith("analytic"):
        var = 1.0 if spec == "analytic" else float(spec.split(":", 1)[1])
        return ("analytic", var)
    if spec.startswith("learned:"):
        return ("learned", spec.split(":", 1)[1])
    raise ConfigurationError(f"unknown prior spec {spec!r} (expected analytic[:var] or learned:path)")


@functools.lru_cache(maxsize=4)
def _load_weights_cached(path: str):
    return load_score_weights(path)


def _build_prior(spec: str):
    kind, arg = _parse_prior_spec(spec)
    if kind == "analytic":
        return GaussianChannelPrior(variance=arg)
    return LearnedChannelPrior(weights=_load_weights_cached(arg))


def _trial_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def run_trial(spec: ExperimentSpec, d_idx: int, snr_idx: int, method: str, trial: int) -> TrialOutcome:
    """Run one (method, D, SNR, trial) cell and return its metrics."""
    d = spec.d_values[d_idx]
    snr_db = spec.snr_dbs[snr_idx]
    dims = SystemDims(spec.n_rx, spec.n_users, spec.n_pilots, d)
    sigma0 = sigma0_from_snr(snr_db, dims)
    constellation = make_constellation(spec.order)
    qpsk = make_constellation(4)
    channel_model = _parse_channel(spec.channel, spec.n_rx, spec.n_users)

    inst_rng = _trial_rng(spec.seed, d_idx, snr_idx, trial)
    H = sample_channel(channel_model, dims, inst_rng)
    X_P = sample_symbols(qpsk, dims.n_users, dims.n_pilots, inst_rng)  # pilots are always QPSK
    X_D = sample_symbols(constellation, dims.n_users, d, inst_rng)
    Y = forward(H, np.concatenate([X_P, X_D], axis=1), sigma0, inst_rng)

    nmse_v = np.nan
    ser_v = np.nan
    if method == "jed":
        method_rng = _trial_rng(spec.seed, d_idx, snr_idx, trial, 1 + METHODS.index(method))
        preset = preset_name_for_snr(snr_db) if spec.preset == "auto" else spec.preset
        cfg = make_config(
            dims, sigma0, preset=preset, levels=spec.levels, inner_steps=spec.inner_steps,
            eps_x=spec.eps_x, eps_h=spec.eps_h, tau_x=spec.tau_x, tau_h=spec.tau_h,
            scale_steps=spec.scale_steps, noise_coupling=spec.noise_coupling,
        )
        res = run_jed(Y, X_P, cfg, _build_prior(spec.prior), constellation, method_rng)
        nmse_v = baselines.nmse(H, res.h_hat)
        if d > 0:
            ser_v = baselines.ser(X_D, res.x_decided, constellation)
    elif method == "ls":
        nmse_v = baselines.nmse(H, baselines.ls_channel_estimate(Y[:, : dims.n_pilots], X_P))
    elif method == "lmmse":
        _, var = _parse_prior_spec(spec.prior)
        prior_var = var if isinstance(var, float) else 1.0
        nmse_v = baselines.nmse(
            H, baselines.lmmse_channel_estimate(Y[:, : dims.n_pilots], X_P, sigma0, prior_var)
        )
    elif method == "mmse-csi":
        if d > 0:
            ser_v = baselines.ser(
                X_D, baselines.mmse_detect(Y[:, dims.n_pilots :], H, sigma0, constellation), constellation
            )
    elif method == "ml-csi":
        if d > 0:
            ser_v = baselines.ser(
                X_D, baselines.ml_detect_bruteforce(Y[:, dims.n_pilots :], H, constellation), constellation
            )
    else:  # pragma: no cover - spec validation rejects unknown methods
        raise ConfigurationError(f"unknown method {method!r}")

    return TrialOutcome(
        method=method, snr_db=snr_db, nmse=float(nmse_v), ser=float(ser_v),
        n_rx=dims.n_rx, n_users=dims.n_users, n_pilots=dims.n_pilots, n_data=d,
        trial=trial, seed=spec.seed,
    )


def _run_task(args):
    spec, d_idx, snr_idx, method, trial = args
    try:
        return run_trial(spec, d_idx, snr_idx, method, trial)
    except DivergenceError as e:
        raise DivergenceError(
            f"trial diverged at method={method} D={spec.d_values[d_idx]} "
            f"snr_db={spec.snr_dbs[snr_idx]} trial={trial}: {e}",
            level=e.level,
            step=e.step,
        ) from e


def run_experiment(spec: ExperimentSpec):
    """Run the full grid, write the CSV, and return the per-trial outcomes.

    On divergence the completed rows are flushed to `spec.out` before the
    error propagates.
    """
    tasks = [
        (spec, d_idx, snr_idx, method, trial)
        for method in spec.methods
        for d_idx in range(len(spec.d_values))
        for snr_idx in range(len(spec.snr_dbs))
        for trial in range(spec.trials)
    ]
    outcomes: list[TrialOutcome] = []
    try:
        if spec.workers == 1:
            for t in tasks:
                outcomes.append(_run_task(t))
        else:
            from . import kernels

            kernels.warmup()  # compile before fork so workers inherit the jitted code
            with ProcessPoolExecutor(max_workers=spec.workers) as pool:
                for out in pool.map(_run_task, tasks, chunksize=8):
                    outcomes.append(out)
    except JedError:
        write_csv(spec, outcomes)
        raise
    write_csv(spec, outcomes)
    return outcomes


def aggregate(outcomes) -> list[dict]:
    """Mean metrics per (method, n_data, snr_db).

    Two NMSE aggregates are reported, both plain means of the per-trial
    columns: `nmse` averages linear values (dominated by rare bad trials),
    `nmse_db` averages per-trial dB values (the geometric mean, the
    statistic plotted on NMSE-vs-SNR curves).
    """
    groups: dict[tuple, list[TrialOutcome]] = {}
    for o in outcomes:
        groups.setdefault((o.method, o.n_data, o.snr_db), []).append(o)
    rows = []
    for (method, n_data, snr_db), outs in sorted(groups.items()):
        nm = np.array([o.nmse for o in outs])
        se = np.array([o.ser for o in outs])
        have_nmse = not np.isnan(nm).any() and (nm > 0).all()
        rows.append(
            dict(
                method=method, n_data=n_data, snr_db=snr_db, n_trials=len(outs),
                nmse=float(np.mean(nm)) if have_nmse else np.nan,
                nmse_db=float(np.mean(10.0 * np.log10(nm))) if have_nmse else np.nan,
                ser=float(np.mean(se)) if not np.isnan(se).any() else np.nan,
                n_rx=outs[0].n_rx, n_users=outs[0].n_users, n_pilots=outs[0].n_pilots,
            )
        )
    return rows


def _fmt(x) -> str:
    if isinstance(x, float):
        if np.isnan(x):
            return ""
        return f"{x:.12g}"
    return str(x)


def _nmse_db(x: float) -> float:
    if np.isnan(x) or x <= 0:
        return np.nan
    return 10.0 * np.log10(x)


def write_csv(spec: ExperimentSpec, outcomes, path=None, timestamp=None) -> None:
    """Self-describing CSV: config header comments, aggregates, then trials."""
    import datetime

    path = path or spec.out
    stamp = timestamp or datetime.datetime.now(datetime.timezone.utc).isoformat()
    lines = ["# jedmimo-results v1"]
    lines.append(f"# generated_at: {stamp}")
    lines.append(f"# snr_definition: {SNR_DEFINITION}")
    lines.append("# aggregate_nmse: mean of per-trial linear nmse")
    lines.append("# aggregate_nmse_db: mean of per-trial nmse_db (geometric mean, curve statistic)")
    for f in fields(spec):
        if f.name == "workers":
            continue  # scheduling knob; results are worker-count independent
        v = getattr(spec, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        lines.append(f"# config: {f.name}={v}")
    lines.append(",".join(CSV_COLUMNS))

    for a in aggregate(outcomes):
        lines.append(",".join(_fmt(v) for v in (
            "aggregate", a["method"], a["n_rx"], a["n_users"], a["n_pilots"], a["n_data"],
            spec.order, spec.channel, spec.prior, spec.preset, a["snr_db"], "",
            a["n_trials"], a["nmse"], a["nmse_db"], a["ser"], SNR_DEFINITION,
        )))
    for o in sorted(outcomes, key=lambda o: (o.method, o.n_data, o.snr_db, o.trial)):
        lines.append(",".join(_fmt(v) for v in (
            "trial", o.method, o.n_rx, o.n_users, o.n_pilots, o.n_data,
            spec.order, spec.channel, spec.prior, spec.preset, o.snr_db, o.trial,
            "", o.nmse, _nmse_db(o.nmse), o.ser, SNR_DEFINITION,
        )))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv_aggregates(path) -> list[dict]:
    """Parse the aggregate rows back out of a results CSV."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        header = None
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#") or not line:
                continue
            if header is None:
                header = line.split(",")
                continue
            rec = dict(zip(header, line.split(",")))
            if rec["row_type"] == "aggregate":
                rows.append(rec)
    return rows
