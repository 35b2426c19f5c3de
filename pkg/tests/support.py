"""Shared test helpers: finite differences, BLER sweeps, synthetic data."""

import numpy as np

from e2elink import comms, training
from e2elink.cli import eval_point_rng


def rel_err(got, want, floor=1e-6):
    got = np.asarray(got, dtype=np.float64)
    want = np.asarray(want, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(got), np.abs(want)), floor)
    return np.abs(got - want) / denom


def central_diff(loss_fn, vec, idx, h=1e-5):
    """Central finite difference of a scalar loss along one coordinate."""
    up = vec.copy()
    up[idx] += h
    down = vec.copy()
    down[idx] -= h
    return (loss_fn(up) - loss_fn(down)) / (2.0 * h)


def fd_check(loss_and_grad, flat, coords, h=1e-5, tol=1e-4):
    """Compare autodiff gradient coordinates against central differences.

    loss_and_grad(vec) -> (loss value, full flat gradient); the same
    function evaluated without using the gradient drives the differences.
    """
    _, grad = loss_and_grad(flat)
    worst = 0.0
    for idx in coords:
        fd = central_diff(lambda v: loss_and_grad(v)[0], flat, idx, h=h)
        worst = max(worst, float(rel_err(grad[idx], fd)))
    return worst if worst < tol else worst  # caller asserts


def bler_sweep(result, channel_spec, grid, *, M=16, n=7, pilot, n_messages, seed):
    """Evaluate the trained link at each grid point with its own stream."""
    out = []
    for i, ebn0 in enumerate(grid):
        noise_var = comms.ebn0_to_noise_var(ebn0, M, n)
        out.append(training.evaluate_bler(
            result.theta_t, result.theta_r, M=M, n=n, noise_var=noise_var,
            channel_spec=channel_spec, pilot=pilot, n_messages=n_messages,
            rng=eval_point_rng(seed, i)))
    return out


def bler_crossing(grid, blers, level=0.1):
    """First Eb/N0 reaching the level, log-linear interpolation between
    grid points; inf when the curve never reaches it."""
    for i in range(len(grid)):
        if blers[i] <= level:
            if i == 0:
                return float(grid[0])
            x0, x1 = grid[i - 1], grid[i]
            y0 = np.log10(max(blers[i - 1], 1e-9))
            y1 = np.log10(max(blers[i], 1e-9))
            return float(x0 + (np.log10(level) - y0) / (y1 - y0) * (x1 - x0))
    return float("inf")


def write_multipath_file(path, rows=10000, paths=5, seed=1234):
    """Synthetic fading file: each sample is a sum of `paths` complex
    exponentials with random amplitudes and phases."""
    rng = np.random.default_rng(seed)
    gains = rng.exponential(scale=1.0, size=(rows, paths))
    phases = np.exp(2j * np.pi * rng.random((rows, paths)))
    h = (gains * phases).sum(axis=1) / np.sqrt(paths)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# synthetic %d-path channel samples\n" % paths)
        for c in h:
            fh.write("%.17g,%.17g\n" % (c.real, c.imag))
    return path
