"""scikit-learn style front end to the reconstruction pipeline."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .config import RunConfig
from .pipeline import reconstruct
from .validation import check_points


class FoilReconstructor(TransformerMixin, BaseEstimator):
    """Wrap a closed triangle mesh around a set of fixed points.

    ``fit(X)`` treats the rows of ``X`` as fixed vertices, contracts a
    spherical foil onto them and stores the result. ``transform(X)`` returns
    the distance from each row of ``X`` to the nearest vertex of the fitted
    mesh, as a column vector.

    Parameters mirror :class:`~foilmesh.config.RunConfig`. ``dt=None``
    selects a time step from the CFL bound of the seed mesh and
    ``pressure_p=None`` a pressure from its fold pressure.

    Attributes
    ----------
    mesh_ : TriMesh
    vertices_ : ndarray of shape (n_vertices, 3)
    faces_ : ndarray of shape (n_faces, 3)
    fixed_mask_ : ndarray of shape (n_vertices,)
    history_ : list of IterationStats
    termination_reason_ : str
    n_iter_ : int
    dt_ : float
    pressure_ : float
    """

    def __init__(self, point_count=500, margin_factor=RunConfig.margin_factor,
                 contraction_scale=RunConfig.contraction_scale, k_base=RunConfig.k_base,
                 damping_c=RunConfig.damping_c, pressure_p=None,
                 pressure_ratio=RunConfig.pressure_ratio, mass_m=RunConfig.mass_m,
                 distance_factor_strength=RunConfig.distance_factor_strength,
                 snapping_tolerance=RunConfig.snapping_tolerance, dt=None,
                 epsilon=RunConfig.epsilon, max_iterations=RunConfig.max_iterations,
                 smooth_every=RunConfig.smooth_every, smooth_lambda=RunConfig.smooth_lambda,
                 smooth_threshold=RunConfig.smooth_threshold, init_refine_levels=0, workers=1):
        self.point_count = point_count
        self.margin_factor = margin_factor
        self.contraction_scale = contraction_scale
        self.k_base = k_base
        self.damping_c = damping_c
        self.pressure_p = pressure_p
        self.pressure_ratio = pressure_ratio
        self.mass_m = mass_m
        self.distance_factor_strength = distance_factor_strength
        self.snapping_tolerance = snapping_tolerance
        self.dt = dt
        self.epsilon = epsilon
        self.max_iterations = max_iterations
        self.smooth_every = smooth_every
        self.smooth_lambda = smooth_lambda
        self.smooth_threshold = smooth_threshold
        self.init_refine_levels = init_refine_levels
        self.workers = workers

    def to_config(self) -> RunConfig:
        return RunConfig(**self.get_params()).validate()

    def fit(self, X, y=None):
        X = check_points(X)
        result = reconstruct(X, self.to_config())
        self.mesh_ = result.mesh
        self.vertices_ = result.mesh.positions
        self.faces_ = result.mesh.faces
        self.fixed_mask_ = result.mesh.fixed
        self.history_ = result.history
        self.termination_reason_ = result.reason
        self.n_iter_ = len(result.history)
        self.dt_ = result.dt
        self.pressure_ = result.params.pressure_p
        self.n_features_in_ = X.shape[1]
        self._tree = cKDTree(self.vertices_[self.mesh_.referenced()])
        return self

    def transform(self, X):
        check_is_fitted(self, "mesh_")
        X = check_points(X)
        dist, _ = self._tree.query(X)
        return np.asarray(dist, dtype=np.float64).reshape(-1, 1)

    def score(self, X, y=None):
        """Negative mean distance of ``X`` to the mesh vertices."""
        return -float(self.transform(X).mean())
