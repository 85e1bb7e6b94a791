"""Pure-numpy distance kernels for the bundled benchmark models.

These are the reference implementations; romc.kernels._native provides a
compiled version of the same functions.  Both backends must agree to high
relative accuracy (they may differ in the last few ulps because summation
order differs).
"""

import numpy as np

BACKEND = "numpy"


def ma2_series(theta1, theta2, noise):
    """Second-order moving-average series driven by a fixed noise vector.

    noise has length T + 2; the first two entries are burn-in terms so the
    output has length T.
    """
    w = np.asarray(noise, dtype=np.float64)
    return w[2:] + theta1 * w[1:-1] + theta2 * w[:-2]


def autocov_summaries(series):
    """Lag-1 and lag-2 autocovariance-style summaries of a series.

    Each lag-k term averages y_t * y_{t-k} over the T - k available pairs.
    """
    y = np.asarray(series, dtype=np.float64)
    n = y.shape[0]
    if n < 3:
        raise ValueError("series must have at least 3 observations")
    s1 = np.sum(y[1:] * y[:-1]) / (n - 1)
    s2 = np.sum(y[2:] * y[:-2]) / (n - 2)
    return np.array([s1, s2])


def ma2_distance_batch(thetas, noise, s1_obs, s2_obs):
    """Squared euclidean summary distance for a batch of MA(2) parameters.

    thetas: (n, 2) array.  Returns (n,) distances against the observed
    summaries (s1_obs, s2_obs), all under the same noise vector.
    """
    th = np.asarray(thetas, dtype=np.float64)
    w = np.asarray(noise, dtype=np.float64)
    if w.shape[0] < 5:
        raise ValueError("noise must yield a series of at least 3 observations")
    y = w[2:][None, :] + th[:, 0:1] * w[1:-1][None, :] + th[:, 1:2] * w[:-2][None, :]
    n = y.shape[1]
    s1 = np.sum(y[:, 1:] * y[:, :-1], axis=1) / (n - 1)
    s2 = np.sum(y[:, 2:] * y[:, :-2], axis=1) / (n - 2)
    return (s1 - s1_obs) ** 2 + (s2 - s2_obs) ** 2


def toy_location(theta):
    """Location term of the 1d benchmark: theta**4 inside [-0.5, 0.5],
    |theta| - c outside, with c chosen so the two pieces join continuously.
    """
    t = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    c = 0.5 - 0.5**4
    return np.where(np.abs(t) <= 0.5, t**4, np.abs(t) - c)


def toy_distance_batch(thetas, u, y_obs):
    """Squared distance for a batch of 1d benchmark parameters.

    thetas: (n,) array of scalar parameters; u is the fixed standard-normal
    draw; y_obs the scalar observation.
    """
    t = np.atleast_1d(np.asarray(thetas, dtype=np.float64))
    return (toy_location(t) + u - y_obs) ** 2
