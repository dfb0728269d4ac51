"""Deterministic direction sets on the unit sphere."""

import os

import numpy as np

DEFAULT_SAMPLES = 2048
GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


def circle_directions(count):
    theta = 2.0 * np.pi * np.arange(count) / count
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def fibonacci_sphere(count):
    i = np.arange(count)
    z = 1.0 - (2.0 * i + 1.0) / count
    r = np.sqrt(1.0 - z * z)
    theta = GOLDEN_ANGLE * i
    return np.stack([r * np.cos(theta), r * np.sin(theta), z], axis=-1)


def gaussian_directions(n, count, seed=0):
    x = np.random.default_rng(seed).standard_normal((count, n))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def directions(n, count=DEFAULT_SAMPLES, seed=0):
    """Uniform angles (n=2), Fibonacci sphere (n=3), normalized Gaussians (n>=4)."""
    if count < 1:
        raise ValueError("need at least one direction")
    if n == 2:
        return circle_directions(count)
    if n == 3:
        return fibonacci_sphere(count)
    return gaussian_directions(n, count, seed)


def max_threads():
    """Thread cap from ``MINKDEFORM_THREADS`` (default: CPU count)."""
    try:
        return max(1, int(os.environ["MINKDEFORM_THREADS"]))
    except (KeyError, ValueError):
        return os.cpu_count() or 1
