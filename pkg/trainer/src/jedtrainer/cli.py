"""jedtrain: fit the channel score network on a JEDCHAN1 dataset."""

import argparse


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="jedtrain", description=__doc__)
    parser.add_argument("--dataset", required=True, help="JEDCHAN1 channel dataset")
    parser.add_argument("--out", required=True, help="output JEDSCORE1 weights path")
    parser.add_argument("--levels", type=int, default=10)
    parser.add_argument("--sigma-first", type=float, default=30.0)
    parser.add_argument("--sigma-last", type=float, default=0.001)
    parser.add_argument("--weighting", choices=("sigma2", "constant"), default="sigma2")
    parser.add_argument("--hidden", default="256,256,256")
    parser.add_argument("--lr", type=float, default=2e-3)
    parser.add_argument("--steps", type=int, default=45_000)
    parser.add_argument("--distill-steps", type=int, default=30_000)
    parser.add_argument("--polish-steps", type=int, default=0)
    parser.add_argument("--batch-size", type=int, default=128)
    parser.add_argument("--val-split", type=float, default=2500 / 9500)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--metrics-log", default=None)
    args = parser.parse_args(argv)

    from .training import TrainSpec, train

    try:
        spec = TrainSpec(
            dataset=args.dataset, out=args.out, levels=args.levels,
            sigma_first=args.sigma_first, sigma_last=args.sigma_last,
            weighting=args.weighting,
            hidden=tuple(int(h) for h in args.hidden.split(",")),
            lr=args.lr, steps=args.steps, distill_steps=args.distill_steps,
            polish_steps=args.polish_steps, batch_size=args.batch_size,
            val_split=args.val_split, seed=args.seed, metrics_log=args.metrics_log,
        )
        result = train(spec)
    except (ValueError, OSError) as e:
        print(f"error: {e}")
        return 1
    last = result.history[-1]
    print(f"trained {args.steps} steps: train loss {last['train_loss']:.4f}, "
          f"val loss {result.val_loss:.4f} "
          f"(analytic reference {result.reference_val_loss:.4f})")
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
