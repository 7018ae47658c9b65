"""Analytic multi-objective benchmark problems with hand-derived gradients.

Each problem carries closed-form objectives, gradients, a box domain, and
(when known) a descriptor of the Pareto set in parameter space, so solver
claims can be checked against ground truth.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .minnorm import gram, min_norm_simplex

DEFAULT_BOX = 2.0


@dataclass(frozen=True)
class FrontDescriptor:
    """Analytic Pareto set: a segment between two points or a simplex hull."""

    kind: str  # "segment" | "hull"
    points: np.ndarray  # rows are endpoints / vertices

    def sample(self, rng, count):
        """Random parameter-space points on the Pareto set."""
        if self.kind == "segment":
            t = rng.uniform(0.0, 1.0, size=count)
            a, b = self.points
            return a + t[:, None] * (b - a)
        lam = rng.dirichlet(np.ones(len(self.points)), size=count)
        return lam @ self.points

    def nearest(self, theta):
        """Closest point of the Pareto set to theta."""
        theta = np.asarray(theta, dtype=float)
        if self.kind == "segment":
            a, b = self.points
            ab = b - a
            t = float(np.clip((theta - a) @ ab / (ab @ ab), 0.0, 1.0))
            return a + t * ab
        # hull: min-norm combination of (v_i - theta) gives the projection
        sol = min_norm_simplex(gram(self.points - theta))
        return sol.alpha @ self.points

    def distance(self, theta):
        return float(np.linalg.norm(np.asarray(theta, dtype=float) - self.nearest(theta)))


@dataclass
class MultiObjectiveProblem:
    """Bundle of m objectives over a d-dimensional box domain.

    f(theta) returns the m objective values; jac(theta) the (m, d) gradient
    rows. on_iteration, when set, lets stateful problems (the simulator)
    advance their batch schedule; analytic benchmarks leave it None.
    """

    name: str
    m: int
    d: int
    f: Callable[[np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray], np.ndarray]
    domain: tuple = (-DEFAULT_BOX, DEFAULT_BOX)
    front: Optional[FrontDescriptor] = None
    on_iteration: Optional[Callable[[int], None]] = field(default=None, repr=False)

    def random_theta(self, rng):
        lo, hi = self.domain
        return rng.uniform(lo, hi, size=self.d)


def quadratic_biobjective(a, b):
    """f1 = |theta - a|^2, f2 = |theta - b|^2; Pareto set is the segment [a, b]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("a and b must be 1-D points of equal dimension")
    if np.array_equal(a, b):
        raise ValueError("a and b must differ")

    def f(theta):
        theta = np.asarray(theta, dtype=float)
        return np.array([np.sum((theta - a) ** 2), np.sum((theta - b) ** 2)])

    def jac(theta):
        theta = np.asarray(theta, dtype=float)
        return np.stack([2.0 * (theta - a), 2.0 * (theta - b)])

    return MultiObjectiveProblem(
        name="quadratic",
        m=2,
        d=a.size,
        f=f,
        jac=jac,
        front=FrontDescriptor("segment", np.stack([a, b])),
    )


def nonconvex_biobjective(d=2):
    """Exponential bi-objective with a non-convex front.

    f1 = 1 - exp(-|theta - u|^2), f2 = 1 - exp(-|theta + u|^2) with
    u = (1/sqrt(d), ..., 1/sqrt(d)). The Pareto set is the segment
    [-u, u]; its image bulges above the chord of the front endpoints, so
    fixed linear weighting cannot reach the middle of the front.
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    u = np.full(d, 1.0 / np.sqrt(d))

    def f(theta):
        theta = np.asarray(theta, dtype=float)
        return np.array(
            [
                1.0 - np.exp(-np.sum((theta - u) ** 2)),
                1.0 - np.exp(-np.sum((theta + u) ** 2)),
            ]
        )

    def jac(theta):
        theta = np.asarray(theta, dtype=float)
        g1 = 2.0 * (theta - u) * np.exp(-np.sum((theta - u) ** 2))
        g2 = 2.0 * (theta + u) * np.exp(-np.sum((theta + u) ** 2))
        return np.stack([g1, g2])

    return MultiObjectiveProblem(
        name="nonconvex",
        m=2,
        d=d,
        f=f,
        jac=jac,
        front=FrontDescriptor("segment", np.stack([-u, u])),
    )


def triobjective_quadratic(c1, c2, c3):
    """Three quadratic bowls; the Pareto set is the triangle hull of the centers."""
    centers = np.stack([np.asarray(c, dtype=float) for c in (c1, c2, c3)])
    if centers.ndim != 2:
        raise ValueError("centers must be 1-D points of equal dimension")
    edges = centers[1:] - centers[0]
    if np.linalg.matrix_rank(edges, tol=1e-12) < 2:
        raise ValueError("centers must be affinely independent (non-collinear)")

    def f(theta):
        theta = np.asarray(theta, dtype=float)
        return np.sum((theta[None, :] - centers) ** 2, axis=1)

    def jac(theta):
        theta = np.asarray(theta, dtype=float)
        return 2.0 * (theta[None, :] - centers)

    return MultiObjectiveProblem(
        name="triquad",
        m=3,
        d=centers.shape[1],
        f=f,
        jac=jac,
        front=FrontDescriptor("hull", centers),
    )


def finite_difference_check(problem, theta, h=1e-5):
    """Max relative error of analytic gradients vs central differences.

    The denominator is floored at 1e-8 so exact zero gradients compare on
    an absolute scale.
    """
    if h <= 0.0:
        raise ValueError("h must be positive")
    theta = np.asarray(theta, dtype=float)
    analytic = np.asarray(problem.jac(theta), dtype=float)
    worst = 0.0
    for i in range(problem.d):
        step = np.zeros_like(theta)
        step[i] = h
        fd = (problem.f(theta + step) - problem.f(theta - step)) / (2.0 * h)
        err = np.abs(fd - analytic[:, i]) / np.maximum(np.abs(analytic[:, i]), 1e-8)
        worst = max(worst, float(err.max()))
    return worst


def benchmark_problem(name, d=2):
    """Benchmark factory used by the command-line tools."""
    if name == "quadratic":
        a = np.zeros(d)
        a[0] = 1.0
        return quadratic_biobjective(a, -a)
    if name == "nonconvex":
        return nonconvex_biobjective(d)
    if name == "triquad":
        if d < 2:
            raise ValueError("triquad needs dimension >= 2")
        c1 = np.zeros(d)
        c2 = np.zeros(d)
        c2[0] = 1.0
        c3 = np.zeros(d)
        c3[1] = 1.0
        return triobjective_quadratic(c1, c2, c3)
    raise ValueError(f"unknown benchmark {name!r}")
