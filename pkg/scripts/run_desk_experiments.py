#!/usr/bin/env python3
"""
Desk-scale error-ratio experiments for oCSE, transfer entropy and
conditional Granger causality. Each experiment prints its measurements and
whether its acceptance condition held; nothing here runs under pytest.
"""

import sys
import os
import argparse
import logging

import numpy as np

sys.path.append(os.path.join(os.path.dirname(__file__), '..', 'src'))

from inference import SignificanceConfig, infer_network
from network_model import Network
from process import GaussianProcessSpec, embed_markov_order, simulate_gaussian, simulate_var
from sweep import SweepSpec, run_sweep


def banner(title):
    print("\n" + "=" * 50)
    print(title)
    print("=" * 50)


def report(condition, label):
    print(f"{'PASS' if condition else 'FAIL'}: {label}")
    return condition


def method_rows(frame, method):
    return frame[frame["method"] == method].reset_index(drop=True)


def network_size(jobs):
    """Error ratios against network size at T=200."""
    banner("Network size: n in {50, 100}, np=5, rho=0.8, T=200")
    spec = SweepSpec(n=[50, 100], degree=[5.0], rho=[0.8], T=[200], method=["ocse", "granger"],
                     realizations=10, master_seed=1, n_jobs=jobs)
    frame = run_sweep(spec).to_frame()
    print(frame[["n", "method", "eps_minus", "eps_plus", "degenerate"]].to_string(index=False))
    ocse = method_rows(frame, "ocse")
    granger = method_rows(frame, "granger")
    ok = report((ocse["eps_minus"] <= 0.10).all() and (ocse["eps_plus"] <= 0.05).all(), "oCSE eps- <= 0.10, eps+ <= 0.05")
    big = granger[granger["n"] == 100].iloc[0]
    ocse_big = ocse[ocse["n"] == 100].iloc[0]
    granger_worse = big["degenerate"] > 0 or big["eps_minus"] >= 3 * ocse_big["eps_minus"]
    return report(granger_worse, "Granger at n=100 > T is degenerate or misses 3x more links") and ok


def spectral_radius_effect(jobs):
    """False positives against rho at T=2000."""
    banner("Spectral radius: n=50, np=5, T=2000")
    spec = SweepSpec(n=[50], degree=[5.0], rho=[0.2, 0.5, 0.8, 0.95], T=[2000], method=["ocse", "te"],
                     realizations=5, master_seed=2, n_jobs=jobs)
    frame = run_sweep(spec).to_frame()
    print(frame[["rho", "method", "eps_minus", "eps_plus"]].to_string(index=False))
    ocse = method_rows(frame, "ocse")
    te = method_rows(frame, "te")
    ok = report((ocse["eps_plus"] <= 3 * (1 - 0.99)).all(), "oCSE eps+ <= 3(1-theta) at every rho")
    te_high = te[te["rho"] == 0.95]["eps_plus"].iloc[0]
    ocse_high = ocse[ocse["rho"] == 0.95]["eps_plus"].iloc[0]
    return report(te_high >= 5 * ocse_high, "TE eps+ at rho=0.95 is at least 5x oCSE") and ok


def sample_size(jobs):
    """False positive saturation and T* against network size."""
    banner("Sample size: n in {30, 60, 120}, np=5, rho=0.8")
    spec = SweepSpec(n=[30, 60, 120], degree=[5.0], rho=[0.8], T=[100, 200, 500, 1000, 2000, 8000],
                     method=["ocse"], realizations=5, master_seed=3, n_jobs=jobs)
    result = run_sweep(spec)
    frame = result.to_frame()
    print(frame[["n", "T", "eps_minus", "eps_plus", "T_star"]].to_string(index=False))
    long_runs = frame[frame["T"].isin([500, 2000, 8000])]
    ok = report(long_runs["eps_plus"].between(0, 3 * (1 - 0.99)).all(), "eps+ saturates within [0, 3(1-theta)]")
    t_star = [value for value in result.critical_sample_sizes.values() if value is not None]
    spread = len(t_star) == 3 and max(t_star) <= 1.5 * min(t_star)
    return report(spread, f"T* across n within factor 1.5: {t_star}") and ok


def degree_effect(jobs):
    """T* against the mean degree."""
    banner("Mean degree: n=60, np in {4, 8, 16}, rho=0.8")
    spec = SweepSpec(n=[60], degree=[4.0, 8.0, 16.0], rho=[0.8], T=[100, 200, 400, 800, 1600, 3200],
                     method=["ocse"], realizations=5, master_seed=4, n_jobs=jobs)
    result = run_sweep(spec)
    t_star = [result.critical_sample_sizes[key] for key in sorted(result.critical_sample_sizes, key=lambda k: k[1])]
    print(f"T* by degree: {t_star}")
    if any(value is None for value in t_star):
        return report(False, "T* defined for every degree")
    monotone = t_star[0] < t_star[1] < t_star[2]
    ratio = t_star[2] / t_star[0]
    return report(monotone and 2 <= ratio <= 8, f"T* increasing in degree, T*(16)/T*(4) = {ratio:.2f}")


def delay_embedding(jobs):
    """oCSE on an embedded AR(2) scalar process."""
    banner("Delay embedding: AR(2) scalar process, tau=2, T=10^4")
    lags = [np.array([[0.5]]), np.array([[0.3]])]
    hits = 0
    for trial in range(20):
        raw = simulate_var(lags, 1.0, 10000, seed=trial)
        embedded = embed_markov_order(raw, 2)
        result = infer_network(embedded, "ocse", SignificanceConfig(seed=trial), n_jobs=jobs, keep_traces=False)
        if set(result.parent_sets[0]) >= {0, 1}:
            hits += 1
    print(f"Both lags recovered in {hits}/20 trials")
    return report(hits >= 18, "both lag dependencies in >= 18/20 trials")


def null_calibration(jobs):
    """False positive rate with no links at all."""
    banner("Null calibration: A=0, n=20, T=2000, theta=0.99")
    n, trials = 20, 5
    ok = True
    for method in ("ocse", "te"):
        found = 0
        pairs = 0
        for trial in range(trials):
            ts = simulate_gaussian(GaussianProcessSpec(Network(np.zeros((n, n))), 1.0, seed=trial), 2000)
            result = infer_network(ts, method, SignificanceConfig(seed=trial), n_jobs=jobs, keep_traces=False)
            found += len(result.edges)
            pairs += n * n if method == "ocse" else n * (n - 1)
        rate = found / pairs
        stderr = np.sqrt(0.01 * 0.99 / pairs)
        print(f"{method}: {found}/{pairs} links, rate {rate:.4f}")
        ok = report(abs(rate - 0.01) <= 3 * stderr, f"{method} rate within 3 binomial SE of 0.01") and ok
    return ok


EXPERIMENTS = {
    "network-size": network_size,
    "spectral-radius": spectral_radius_effect,
    "sample-size": sample_size,
    "degree": degree_effect,
    "embedding": delay_embedding,
    "null": null_calibration,
}


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Desk-scale error-ratio experiments")
    parser.add_argument("--only", choices=sorted(EXPERIMENTS), action="append", help="Run only these experiments")
    parser.add_argument("--jobs", type=int, default=int(os.getenv("OCSE_JOBS", "1")))
    args = parser.parse_args()

    logging.basicConfig(level=logging.WARNING)
    selected = args.only or list(EXPERIMENTS)
    outcomes = {name: EXPERIMENTS[name](args.jobs) for name in selected}

    banner("Summary")
    for name, passed in outcomes.items():
        print(f"{name}: {'PASS' if passed else 'FAIL'}")
    sys.exit(0 if all(outcomes.values()) else 1)
