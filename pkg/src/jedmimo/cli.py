"""Command line interface: simulate, baseline, gen-channels, validate-prior.

Config files are flat ``key = value`` text (one pair per line, ``#``
comments); explicit command-line flags override file values. Errors exit
nonzero and print ``error: category=<cat>: <message>`` on stderr.
"""

import argparse
import os
import sys

import numpy as np

from .errors import ConfigurationError, JedError
from .experiment import METHODS, ExperimentSpec, run_experiment
from .model import SystemDims
from .scores import GaussianChannelPrior, prior_score_channel
from .weights import evaluate_score_network, load_score_weights

EXIT_CODES = {
    "config": 2,
    "shape": 3,
    "rank": 4,
    "capacity": 5,
    "divergence": 6,
    "format": 7,
    "numerical": 8,
    "contract": 9,
    "undefined": 10,
    "error": 1,
}

WORKERS_ENV = "JEDMIMO_WORKERS"


def load_flat_config(path) -> dict:
    """Parse a flat key=value config file into a string dict."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected key = value, got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def _csv_ints(text: str):
    return tuple(int(v) for v in str(text).split(",") if v != "")

def _csv_floats(text: str):
    return tuple(float(v) for v in str(text).split(",") if v != "")

def _csv_strs(text: str):
    return tuple(v.strip() for v in str(text).split(",") if v.strip())


def _add_grid_args(p: argparse.ArgumentParser, default_methods: str):
    p.add_argument("--config", help="flat key=value config file (flags override)")
    p.add_argument("--n-rx", type=int, default=16)
    p.add_argument("--n-users", type=int, default=4)
    p.add_argument("--pilots", type=int, default=8)
    p.add_argument("--data", default="32", help="comma list of D values (0 = pilots only)")
    p.add_argument("--snr", default="25", help="comma list of SNR values in dB")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--methods", default=default_methods, help=f"comma list from {METHODS}")
    p.add_argument("--order", type=int, default=4, help="QAM order (4, 16, 64)")
    p.add_argument("--channel", default="iid", help="iid or kron:<rho_rx>:<rho_tx>")
    p.add_argument("--prior", default="analytic:1.0", help="analytic[:var] or learned:<weights path>")
    p.add_argument("--preset", default="auto", help="auto, low-snr, or high-snr")
    p.add_argument("--levels", type=int, default=300)
    p.add_argument("--inner-steps", type=int, default=3)
    p.add_argument("--eps-x", type=float, default=None)
    p.add_argument("--eps-h", type=float, default=None)
    p.add_argument("--tau-x", type=float, default=None)
    p.add_argument("--tau-h", type=float, default=None)
    p.add_argument("--no-scale-steps", action="store_true",
                   help="keep stock step sizes instead of rescaling for system size")
    p.add_argument("--noise-coupling", default="independent", choices=("independent", "shared"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None,
                   help=f"worker processes (default ${WORKERS_ENV} or 1)")
    p.add_argument("--out", default="results.csv")


def _spec_from_args(args) -> ExperimentSpec:
    workers = args.workers
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    return ExperimentSpec(
        n_rx=args.n_rx, n_users=args.n_users, n_pilots=args.pilots,
        d_values=_csv_ints(args.data), snr_dbs=_csv_floats(args.snr),
        trials=args.trials, methods=_csv_strs(args.methods), order=args.order,
        channel=args.channel, prior=args.prior, preset=args.preset,
        levels=args.levels, inner_steps=args.inner_steps,
        eps_x=args.eps_x, eps_h=args.eps_h, tau_x=args.tau_x, tau_h=args.tau_h,
        scale_steps=not args.no_scale_steps, noise_coupling=args.noise_coupling,
        seed=args.seed, workers=workers, out=args.out,
    )


def _cmd_simulate(args) -> int:
    spec = _spec_from_args(args)
    outcomes = run_experiment(spec)
    print(f"wrote {spec.out}: {len(outcomes)} trials across "
          f"{len(spec.methods)} methods, D={spec.d_values}, SNR={spec.snr_dbs}")
    return 0


def _cmd_gen_channels(args) -> int:
    from .datasets import generate_channel_dataset
    from .experiment import _parse_channel

    dims = SystemDims(args.n_rx, args.n_users, n_pilots=0, n_data=1)
    model = _parse_channel(args.model, args.n_rx, args.n_users)
    generate_channel_dataset(model, dims, args.count, args.seed, args.out)
    print(f"wrote {args.out}: {args.count} channels of {args.n_rx}x{args.n_users} ({args.model})")
    return 0


def _cmd_validate_prior(args) -> int:
    from .experiment import _parse_channel
    from .model import sample_channel

    dims = SystemDims(args.n_rx, args.n_users, n_pilots=0, n_data=1)
    model = _parse_channel(args.model, args.n_rx, args.n_users)
    reference = GaussianChannelPrior(variance=args.prior_var)
    weights = None if args.weights == "analytic" else load_score_weights(args.weights)

    rng = np.random.default_rng(args.seed)
    sigmas = np.geomspace(args.sigma_first, args.sigma_last, args.sigma_levels)
    rel_errors = []
    for sigma in sigmas:
        for _ in range(args.samples):
            H = sample_channel(model, dims, rng)
            H_noisy = H + np.sqrt(sigma**2 / 2) * (
                rng.standard_normal(H.shape) + 1j * rng.standard_normal(H.shape)
            )
            truth = prior_score_channel(H_noisy, float(sigma), reference)
            if weights is None:
                approx = truth
            else:
                approx = evaluate_score_network(weights, H_noisy, float(sigma))
            rel_errors.append(np.linalg.norm(approx - truth) / np.linalg.norm(truth))
    mean_err = float(np.mean(rel_errors))
    max_err = float(np.max(rel_errors))
    passed = mean_err <= args.tolerance
    print(f"sigma grid: [{args.sigma_first}, {args.sigma_last}] x{args.sigma_levels}, "
          f"{args.samples} samples per level")
    print(f"mean relative error: {mean_err:.4f}")
    print(f"max relative error:  {max_err:.4f}")
    print(f"tolerance (mean):    {args.tolerance:.4f} -> {'PASS' if passed else 'FAIL'}")
    return 0 if passed else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="jedmimo",
        description="Joint MIMO channel estimation and data detection benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="Monte Carlo sweep incl. the Langevin sampler")
    _add_grid_args(p_sim, default_methods="jed")
    p_sim.set_defaults(func=_cmd_simulate)

    p_base = sub.add_parser("baseline", help="classical estimator/detector sweep")
    _add_grid_args(p_base, default_methods="ls,lmmse,mmse-csi")
    p_base.set_defaults(func=_cmd_baseline)

    p_gen = sub.add_parser("gen-channels", help="write a JEDCHAN1 training dataset")
    p_gen.add_argument("--config", help="flat key=value config file (flags override)")
    p_gen.add_argument("--model", default="iid")
    p_gen.add_argument("--n-rx", type=int, default=16)
    p_gen.add_argument("--n-users", type=int, default=4)
    p_gen.add_argument("--count", type=int, required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=_cmd_gen_channels)

    p_val = sub.add_parser("validate-prior", help="compare a weights file to the closed-form score")
    p_val.add_argument("--config", help="flat key=value config file (flags override)")
    p_val.add_argument("--weights", required=True, help="JEDSCORE1 path, or 'analytic' for a self-test")
    p_val.add_argument("--model", default="iid")
    p_val.add_argument("--n-rx", type=int, default=16)
    p_val.add_argument("--n-users", type=int, default=4)
    p_val.add_argument("--prior-var", type=float, default=1.0)
    p_val.add_argument("--tolerance", type=float, default=0.10)
    p_val.add_argument("--sigma-first", type=float, default=0.01)
    p_val.add_argument("--sigma-last", type=float, default=1.0)
    p_val.add_argument("--sigma-levels", type=int, default=10)
    p_val.add_argument("--samples", type=int, default=64)
    p_val.add_argument("--seed", type=int, default=0)
    p_val.set_defaults(func=_cmd_validate_prior)

    # config file values become parser defaults, so explicit flags win
    argv = list(sys.argv[1:] if argv is None else argv)
    if "--config" in argv:
        cfg_path = argv[argv.index("--config") + 1]
        overrides = load_flat_config(cfg_path)
        for p in (p_sim, p_base, p_gen, p_val):
            coerced = {}
            for action in p._actions:
                if action.dest not in overrides:
                    continue
                raw = overrides[action.dest]
                if isinstance(action, argparse._StoreTrueAction):
                    coerced[action.dest] = raw.lower() in ("1", "true", "yes", "on")
                elif action.type is not None:
                    coerced[action.dest] = action.type(raw)
                else:
                    coerced[action.dest] = raw
            p.set_defaults(**coerced)

    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except JedError as e:
        print(f"error: category={e.category}: {e}", file=sys.stderr)
        return EXIT_CODES.get(e.category, 1)
    except OSError as e:
        print(f"error: category=io: {e}", file=sys.stderr)
        return 11


def _cmd_baseline(args) -> int:
    return _cmd_simulate(args)


if __name__ == "__main__":
    raise SystemExit(main())
