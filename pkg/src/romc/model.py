"""Problem definition layer: priors, seeded simulators, summaries and the
deterministic per-seed objectives that the optimizers and regions consume.

A seeded simulator is any object with

    run(theta, seed) -> 1d output array
    output_dimension -> int

and optionally bind(seed) -> callable(theta) -> output, which fixes the
nuisance randomness once so repeated calls do not rebuild it.  With the
seed fixed the map theta -> distance(summary(output), observed summary)
is an ordinary deterministic function; that is what DeterministicObjective
represents and everything downstream optimizes, bounds and samples.
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from .errors import NumericalFailure

SEED_MAX = 2**32

# Named sub-streams used when deriving per-problem generators, so the
# optimizer, the sampler and the surrogate fitter never share draws.
STREAM_SOLVE = 1
STREAM_SAMPLE = 2
STREAM_FIT = 3


def squared_distance(a, b):
    """Squared euclidean distance between two summary vectors."""
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return float(np.dot(diff, diff))


def draw_nuisance_seeds(n, master_seed):
    """Draw n simulator seeds from a master seed.

    Returns a list of n integers in [1, 2**32 - 1].  The list depends only
    on (n, master_seed), and the first n seeds of a longer draw equal the
    shorter draw, so runs with different n share a common prefix.
    """
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(master_seed)
    return [int(s) for s in rng.integers(1, SEED_MAX, size=n)]


def derive_rng(master_seed, *path):
    """Deterministic child generator for a named stream.

    Streams are identified by integer paths, e.g. (problem_index, stage).
    Deriving before dispatch keeps results independent of scheduling.
    """
    return np.random.default_rng([int(master_seed), *[int(p) for p in path]])


class Prior:
    """Interface for prior distributions over the parameter vector.

    Subclasses provide dimension, bounds (a (D, 2) array of finite
    lower/upper limits that enclose the support), sample, and log_pdf.
    """

    @property
    def dimension(self):
        raise NotImplementedError

    @property
    def bounds(self):
        raise NotImplementedError

    @property
    def ranges(self):
        b = self.bounds
        return b[:, 1] - b[:, 0]

    def sample(self, rng):
        raise NotImplementedError

    def log_pdf(self, theta):
        raise NotImplementedError

    def pdf(self, theta):
        return float(np.exp(self.log_pdf(theta)))

    def pdf_batch(self, thetas):
        thetas = np.asarray(thetas, dtype=np.float64)
        return np.array([self.pdf(t) for t in thetas])


class BoxUniformPrior(Prior):
    """Uniform prior over an axis-aligned box."""

    def __init__(self, bounds):
        b = np.asarray(bounds, dtype=np.float64)
        if b.ndim != 2 or b.shape[1] != 2:
            raise ValueError("bounds must have shape (D, 2)")
        if not np.all(np.isfinite(b)) or not np.all(b[:, 0] < b[:, 1]):
            raise ValueError("each lower bound must be finite and below its upper bound")
        self._bounds = b
        self._log_density = -float(np.sum(np.log(b[:, 1] - b[:, 0])))

    @property
    def dimension(self):
        return self._bounds.shape[0]

    @property
    def bounds(self):
        return self._bounds.copy()

    def sample(self, rng):
        return rng.uniform(self._bounds[:, 0], self._bounds[:, 1])

    def log_pdf(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        inside = np.all(theta >= self._bounds[:, 0]) and np.all(theta <= self._bounds[:, 1])
        return self._log_density if inside else -np.inf

    def pdf_batch(self, thetas):
        thetas = np.asarray(thetas, dtype=np.float64)
        inside = np.all(
            (thetas >= self._bounds[:, 0]) & (thetas <= self._bounds[:, 1]), axis=1
        )
        return np.where(inside, np.exp(self._log_density), 0.0)


class IdentitySummary:
    """Summary that passes the simulator output through unchanged."""

    def __init__(self, dimension):
        self.summary_dimension = int(dimension)

    def __call__(self, output):
        return np.asarray(output, dtype=np.float64)


@dataclass
class Model:
    """Bundle of everything that defines one inference problem.

    config, when set, is a plain dict from which the bundled benchmark
    registry can rebuild the model; models without it cannot be persisted
    to artifacts.
    """

    name: str
    prior: Prior
    simulator: Any
    summary: Callable
    observed: np.ndarray
    distance: Callable = squared_distance
    batch_distance_factory: Optional[Callable] = None
    config: Optional[dict] = field(default=None)

    @property
    def observed_summary(self):
        return np.asarray(self.summary(self.observed), dtype=np.float64)


class _SeedBound:
    """Fallback binding for simulators without a bind method."""

    def __init__(self, simulator, seed):
        self.simulator = simulator
        self.seed = seed

    def __call__(self, theta):
        return self.simulator.run(theta, self.seed)


class DeterministicObjective:
    """Distance to the observed summaries under one fixed simulator seed.

    Scalar evaluation routes through the batch path when one is available
    so that a point evaluated alone and the same point evaluated inside a
    batch give bit-identical values.
    """

    def __init__(self, simulate, summary, observed_summary, distance, seed, index,
                 dimension, batch=None):
        self.simulate = simulate
        self.summary = summary
        self.observed_summary = np.asarray(observed_summary, dtype=np.float64)
        self.distance = distance
        self.seed = int(seed)
        self.index = int(index)
        self.dimension = int(dimension)
        self.batch = batch

    def summaries(self, theta):
        """Summary vector of the seeded simulator output at theta."""
        theta = np.asarray(theta, dtype=np.float64)
        return np.asarray(self.summary(self.simulate(theta)), dtype=np.float64)

    def evaluate(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.dimension,):
            raise ValueError(
                f"theta must have shape ({self.dimension},), got {theta.shape}"
            )
        if self.batch is not None:
            return float(self.batch(theta[None, :])[0])
        return float(self.distance(self.summaries(theta), self.observed_summary))

    def evaluate_batch(self, thetas):
        thetas = np.asarray(thetas, dtype=np.float64)
        if thetas.ndim != 2 or thetas.shape[1] != self.dimension:
            raise ValueError(
                f"thetas must have shape (n, {self.dimension}), got {thetas.shape}"
            )
        if self.batch is not None:
            return np.asarray(self.batch(thetas), dtype=np.float64)
        return np.array([self.evaluate(t) for t in thetas])

    __call__ = evaluate


def make_objective(model, seed, index, observed=None):
    """Build the deterministic objective for one nuisance seed.

    observed defaults to the model's stored observation; an explicit value
    must match the simulator output dimension.
    """
    if observed is None:
        observed = model.observed
    observed = np.asarray(observed, dtype=np.float64)
    out_dim = getattr(model.simulator, "output_dimension", None)
    if out_dim is not None and observed.shape != (out_dim,):
        raise ValueError(
            f"observed must have shape ({out_dim},), got {observed.shape}"
        )
    observed_summary = np.asarray(model.summary(observed), dtype=np.float64)
    if hasattr(model.simulator, "bind"):
        simulate = model.simulator.bind(seed)
    else:
        simulate = _SeedBound(model.simulator, seed)
    batch = None
    if model.batch_distance_factory is not None:
        batch = model.batch_distance_factory(seed, observed_summary)
    return DeterministicObjective(
        simulate=simulate,
        summary=model.summary,
        observed_summary=observed_summary,
        distance=model.distance,
        seed=seed,
        index=index,
        dimension=model.prior.dimension,
        batch=batch,
    )


def evaluate_distance_batch(distance, thetas):
    """Evaluate any distance-like callable on rows of thetas.

    Objects exposing evaluate_batch (objectives, surrogates) use it; plain
    scalar callables are applied row by row.
    """
    thetas = np.asarray(thetas, dtype=np.float64)
    if hasattr(distance, "evaluate_batch"):
        return np.asarray(distance.evaluate_batch(thetas), dtype=np.float64)
    return np.array([float(distance(t)) for t in thetas])


def finite_difference_gradient(func, theta, step=1e-5):
    """Central finite-difference gradient with per-coordinate steps.

    The step along coordinate m is step * max(1, |theta_m|).  Uses exactly
    2 * D function evaluations; raises NumericalFailure at the probed point
    if any evaluation is non-finite.
    """
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.empty_like(theta)
    for m in range(theta.shape[0]):
        h = step * max(1.0, abs(theta[m]))
        probe = theta.copy()
        probe[m] = theta[m] + h
        f_plus = func(probe)
        probe[m] = theta[m] - h
        f_minus = func(probe)
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NumericalFailure(
                f"non-finite objective near coordinate {m}", point=probe
            )
        grad[m] = (f_plus - f_minus) / (2.0 * h)
    return grad
