"""Acceptance criteria, one test per criterion, fixed tolerances.

Each test prints a PASS/FAIL line (run with `pytest -s` to see them all).
Aggregate NMSE comparisons use the dB-domain aggregate (mean of per-trial
dB values), the curve statistic documented in the results CSV.
"""

import time

import numpy as np
import pytest

import jedmimo as jm
from jedmimo import kernels
from jedmimo.experiment import ExperimentSpec, aggregate, run_experiment
from jedmimo.model import complex_normal

from oracles import WIRTINGER, log_mixture_density, numerical_complex_grad

SEED = 0  # fixed up front for the whole suite


def _report(name, ok, detail=""):
    print(f"\n{name}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module", autouse=True)
def _warm_kernels():
    kernels.warmup()


def test_a1_score_correctness(qpsk):
    t0 = time.monotonic()
    rng = np.random.default_rng(SEED)

    # symbol prior score vs assembled finite difference of its log mixture
    worst_prior = 0.0
    sigmas = np.linspace(0.05, 2.0, 10)
    for i in range(100):
        sigma = float(sigmas[i % len(sigmas)])
        x = complex_normal(rng, (1, 1), 2.0)

        def logdens(Xv, s=sigma):
            return log_mixture_density(Xv, qpsk.points, s).sum()

        fd = numerical_complex_grad(logdens, x)
        out = jm.prior_score_symbols(x, sigma, qpsk)
        rel = abs(out[0, 0] - fd[0, 0]) / max(abs(fd[0, 0]), 1e-9)
        worst_prior = max(worst_prior, rel)
    ok_prior = worst_prior <= 1e-4

    # channel likelihood score vs finite difference, instances up to 4x2, K=6
    worst_chan = 0.0
    for n_rx, n_users in ((1, 1), (2, 2), (4, 2)):
        for _ in range(5):
            H = complex_normal(rng, (n_rx, n_users))
            X = complex_normal(rng, (n_users, 6))
            Y = complex_normal(rng, (n_rx, 6))
            state = jm.NoiseLevelState(sigma_x=0.3, sigma_h=0.4, sigma0=0.6)
            denom = state.sigma0**2 + state.sigma_h**2

            def logdens(Hv):
                return -np.linalg.norm(Y - Hv @ X) ** 2 / denom

            fd = WIRTINGER * numerical_complex_grad(logdens, H)
            out = jm.likelihood_score_channel(Y, X, H, state)
            worst_chan = max(worst_chan, float(np.abs(out - fd).max()))
    ok_chan = worst_chan <= 1e-5

    # push-through equivalence of the two symbol-guidance factorizations
    worst_pt = 0.0
    for _ in range(50):
        n_users = int(rng.integers(1, 9))
        n_rx = int(rng.integers(n_users, 17))
        H = complex_normal(rng, (n_rx, n_users))
        X = complex_normal(rng, (n_users, 4))
        Y = complex_normal(rng, (n_rx, 4))
        state = jm.NoiseLevelState(sigma_x=0.5, sigma_h=0.1, sigma0=0.4)
        small = jm.likelihood_score_symbols(Y, X, H, state)
        A_big = (state.sigma_x**2) * (H @ H.conj().T)
        A_big[np.arange(n_rx), np.arange(n_rx)] += state.sigma0**2
        big = H.conj().T @ np.linalg.solve(A_big, Y - H @ X)
        worst_pt = max(worst_pt, np.linalg.norm(small - big) / np.linalg.norm(big))
    ok_pt = worst_pt <= 1e-10

    elapsed = time.monotonic() - t0
    _report(
        "A1 score-correctness",
        ok_prior and ok_chan and ok_pt and elapsed < 10.0,
        f"(prior fd rel {worst_prior:.2e} <= 1e-4, channel fd abs {worst_chan:.2e} <= 1e-5, "
        f"push-through rel {worst_pt:.2e} <= 1e-10, runtime {elapsed:.1f}s < 10s)",
    )


def test_a2_analytic_prior_identity():
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(50):
        shape = (int(rng.integers(1, 9)), int(rng.integers(1, 9)))
        H = complex_normal(rng, shape, 4.0)
        sigma_h = float(rng.uniform(0.0, 3.0))
        var = float(rng.uniform(0.1, 5.0))
        out = jm.prior_score_channel(H, sigma_h, jm.GaussianChannelPrior(var))
        worst = max(worst, float(np.abs(out + H / (var + sigma_h**2)).max()))
    _report("A2 analytic-prior identity", worst <= 1e-14, f"(max abs dev {worst:.2e} <= 1e-14)")


def test_a3_oracle_ordering(qpsk):
    t0 = time.monotonic()
    dims = jm.SystemDims(n_rx=2, n_users=2, n_pilots=8, n_data=2)

    ok_det = True
    det_lines = []
    for snr_db in (5.0, 10.0, 15.0):
        sigma0 = jm.sigma0_from_snr(snr_db, dims)
        err_ml = err_mmse = total = 0
        for t in range(10_000):
            rng = np.random.default_rng((SEED, 3, int(snr_db), t))
            H = jm.sample_channel(jm.IidGaussianChannel(), dims, rng)
            X = jm.sample_symbols(qpsk, 2, dims.n_data, rng)
            Y = jm.forward(H, X, sigma0, rng)
            err_ml += int((jm.ml_detect_bruteforce(Y, H, qpsk) != X).sum())
            err_mmse += int((jm.mmse_detect(Y, H, sigma0, qpsk) != X).sum())
            total += X.size
        ser_ml, ser_mmse = err_ml / total, err_mmse / total
        det_lines.append(f"{snr_db:g}dB ML {ser_ml:.4f} <= MMSE {ser_mmse:.4f}")
        ok_det = ok_det and ser_ml <= ser_mmse

    nmse_ls = nmse_lmmse = 0.0
    sigma0 = jm.sigma0_from_snr(0.0, dims)
    for t in range(500):
        rng = np.random.default_rng((SEED, 4, t))
        H = jm.sample_channel(jm.IidGaussianChannel(), dims, rng)
        Xp = jm.sample_symbols(qpsk, 2, dims.n_pilots, rng)
        Yp = jm.forward(H, Xp, sigma0, rng)
        nmse_ls += jm.nmse(H, jm.ls_channel_estimate(Yp, Xp))
        nmse_lmmse += jm.nmse(H, jm.lmmse_channel_estimate(Yp, Xp, sigma0, 1.0))
    ok_est = nmse_lmmse <= nmse_ls

    elapsed = time.monotonic() - t0
    _report(
        "A3 oracle-ordering",
        ok_det and ok_est and elapsed < 120.0,
        f"({'; '.join(det_lines)}; LMMSE {nmse_lmmse / 500:.3f} <= LS {nmse_ls / 500:.3f} "
        f"at 0dB; runtime {elapsed:.0f}s < 120s)",
    )


def test_a4_jed_trend(tmp_path):
    t0 = time.monotonic()
    spec = ExperimentSpec(
        n_rx=16, n_users=4, n_pilots=8, d_values=(0, 8, 16, 32), snr_dbs=(25.0,),
        trials=200, methods=("jed", "mmse-csi"), order=4, channel="iid",
        prior="analytic:1.0", levels=300, inner_steps=3, seed=SEED,
        out=str(tmp_path / "a4.csv"),
    )
    outcomes = run_experiment(spec)
    aggs = {(a["method"], a["n_data"]): a for a in aggregate(outcomes)}

    nmse_db = [aggs[("jed", d)]["nmse_db"] for d in (0, 8, 16, 32)]
    ok_monotone = all(a > b for a, b in zip(nmse_db, nmse_db[1:]))
    gain = nmse_db[0] - nmse_db[-1]
    ok_gain = gain >= 1.0
    ser_jed = aggs[("jed", 32)]["ser"]
    ser_mmse = aggs[("mmse-csi", 32)]["ser"]
    ok_ser = ser_jed <= 2.0 * ser_mmse
    elapsed = time.monotonic() - t0
    _report(
        "A4 jed-trend",
        ok_monotone and ok_gain and ok_ser and elapsed < 1800.0,
        f"(nmse_db over D=(0,8,16,32): {[round(v, 1) for v in nmse_db]} strictly decreasing: "
        f"{ok_monotone}; D=32 beats D=0 by {gain:.1f}dB >= 1dB; "
        f"SER jed {ser_jed:.5f} <= 2x mmse-csi {ser_mmse:.5f}: {ok_ser}; "
        f"runtime {elapsed:.0f}s < 1800s)",
    )


def test_a5_high_snr_consistency(tmp_path):
    spec = ExperimentSpec(
        n_rx=4, n_users=2, n_pilots=8, d_values=(8,), snr_dbs=(30.0,),
        trials=500, methods=("jed", "mmse-csi"), order=4, channel="iid",
        prior="analytic:1.0", levels=300, inner_steps=3, seed=SEED,
        out=str(tmp_path / "a5.csv"),
    )
    outcomes = run_experiment(spec)
    aggs = {(a["method"], a["n_data"]): a for a in aggregate(outcomes)}
    ser_jed = aggs[("jed", 8)]["ser"]
    nmse_db = aggs[("jed", 8)]["nmse_db"]
    floor = aggs[("mmse-csi", 8)]["ser"]
    ok = ser_jed < 1e-2 and nmse_db < -20.0
    _report(
        "A5 high-snr consistency",
        ok,
        f"(SER {ser_jed:.5f} < 1e-2, NMSE {nmse_db:.1f}dB < -20dB; "
        f"perfect-CSI MMSE floor {floor:.5f})",
    )


def test_a6_determinism_and_formats(tmp_path):
    # CSV byte-identity across worker counts
    out = str(tmp_path / "det.csv")
    base = dict(
        n_rx=4, n_users=2, n_pilots=4, d_values=(4,), snr_dbs=(20.0,), trials=4,
        methods=("jed", "lmmse"), levels=20, seed=SEED, out=out,
    )
    run_experiment(ExperimentSpec(**base, workers=1))
    bytes1 = [l for l in open(out).read().splitlines() if not l.startswith("# generated_at")]
    run_experiment(ExperimentSpec(**base, workers=2))
    bytes2 = [l for l in open(out).read().splitlines() if not l.startswith("# generated_at")]
    ok_csv = bytes1 == bytes2

    # JEDCHAN1 round trip
    from jedmimo.datasets import generate_channel_dataset, read_channel_dataset

    chan_path = tmp_path / "c.bin"
    dims = jm.SystemDims(4, 2, 0, 1)
    generate_channel_dataset(jm.IidGaussianChannel(), dims, 12, SEED, chan_path)
    header, mats = read_channel_dataset(chan_path)
    ok_chan = header["count"] == 12 and mats.shape == (12, 4, 2)

    # JEDSCORE1 round trip and CRC rejection
    from jedmimo.weights import (
        ACT_IDENTITY,
        ACT_SILU,
        ScoreModelWeights,
        load_score_weights,
        save_score_weights,
    )

    rng = np.random.default_rng(SEED)
    d = 2 * 4 * 2
    w = ScoreModelWeights(
        layer_dims=(d + 1, 8, d),
        weights=(
            rng.standard_normal((8, d + 1)).astype(np.float32).astype(float),
            rng.standard_normal((d, 8)).astype(np.float32).astype(float),
        ),
        biases=(np.zeros(8), np.zeros(d)),
        activations=(ACT_SILU, ACT_IDENTITY),
    )
    wpath = tmp_path / "w.bin"
    save_score_weights(wpath, w)
    back = load_score_weights(wpath)
    H = complex_normal(rng, (4, 2))
    ok_weights = np.allclose(
        jm.evaluate_score_network(back, H, 0.2), jm.evaluate_score_network(w, H, 0.2)
    )

    blob = bytearray(wpath.read_bytes())
    blob[-12] ^= 0x01
    wpath.write_bytes(bytes(blob))
    try:
        load_score_weights(wpath)
        ok_crc = False
    except jm.FormatError:
        ok_crc = True

    _report(
        "A6 determinism-and-formats",
        ok_csv and ok_chan and ok_weights and ok_crc,
        f"(csv bytes workers 1 vs 2: {ok_csv}; JEDCHAN1 round-trip: {ok_chan}; "
        f"JEDSCORE1 round-trip: {ok_weights}; corrupted CRC rejected: {ok_crc})",
    )
