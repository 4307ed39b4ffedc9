"""scikit-learn style front end for state classification."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import DEFAULT_TOLERANCES, Tolerances, check_square, check_states, check_vector
from .compat import VerdictKind, classify
from .measure_model import MeasurementSetup
from .qcore import BipartiteSplit, Observable, UnitaryOperator

__all__ = ["CompatibilityClassifier"]


class CompatibilityClassifier(ClassifierMixin, BaseEstimator):
    """Label initial system states by how a measurement setup treats them.

    Parameters
    ----------
    unitary : array-like of shape (d_mu * d_psi, d_mu * d_psi)
        Joint unitary, apparatus factor on the slow index.
    ready : array-like of shape (d_mu,)
        Apparatus ready state.
    observable : array-like of shape (d_psi, d_psi)
        Hermitian system observable.
    tol_product, tol_eigvec, tol_eig : float
        Schmidt, eigen-residual and eigenvalue-clustering thresholds.

    Attributes
    ----------
    setup_ : MeasurementSetup
    classes_ : ndarray of str
        ``Compatible``, ``EntangledOutput`` and ``ProductNonEigenstate``.
    n_features_in_ : int
        System dimension.

    Examples
    --------
    >>> import numpy as np
    >>> cnot = np.eye(4)[[0, 3, 2, 1]]
    >>> clf = CompatibilityClassifier(cnot, [1, 0], np.diag([1.0, -1.0])).fit()
    >>> clf.predict([[1, 0], [2 ** -0.5, 2 ** -0.5]]).tolist()
    ['Compatible', 'EntangledOutput']
    """

    def __init__(self, unitary=None, ready=None, observable=None, *,
                 tol_product=DEFAULT_TOLERANCES.tol_product,
                 tol_eigvec=DEFAULT_TOLERANCES.tol_eigvec,
                 tol_eig=DEFAULT_TOLERANCES.tol_eig):
        self.unitary = unitary
        self.ready = ready
        self.observable = observable
        self.tol_product = tol_product
        self.tol_eigvec = tol_eigvec
        self.tol_eig = tol_eig

    @classmethod
    def from_setup(cls, setup: MeasurementSetup, **params) -> "CompatibilityClassifier":
        return cls(setup.unitary.matrix, setup.ready.amplitudes, setup.observable.matrix, **params)

    def fit(self, X=None, y=None):
        """Validate the setup and cache the observable's spectral decomposition.

        ``X`` and ``y`` are ignored; the estimator has nothing to learn from data.
        """
        if self.unitary is None or self.ready is None or self.observable is None:
            raise ValueError("unitary, ready and observable are all required")
        ready = check_vector(self.ready, name="ready")
        obs = check_square(self.observable, name="observable")
        U = check_square(self.unitary, name="unitary", dim=ready.size * obs.shape[0])
        self.tols_ = Tolerances(tol_product=self.tol_product, tol_eigvec=self.tol_eigvec,
                                tol_eig=self.tol_eig)
        self.setup_ = MeasurementSetup(
            split=BipartiteSplit(ready.size, obs.shape[0]),
            ready=ready,
            observable=Observable.from_matrix(obs, tol_eig=self.tol_eig),
            unitary=UnitaryOperator(U),
        )
        self.classes_ = np.array([k.value for k in VerdictKind])
        self.n_features_in_ = obs.shape[0]
        return self

    def verdicts(self, X):
        """Full :class:`~qcompat.compat.CompatibilityVerdict` per row of ``X``."""
        check_is_fitted(self, "setup_")
        X = check_states(X, self.n_features_in_)
        return [classify(self.setup_, x, self.tols_) for x in X]

    def predict(self, X):
        return np.array([v.kind.value for v in self.verdicts(X)])

    def transform(self, X):
        """Per-state features ``[second_schmidt, eigen_residual, eigenvalue]``.

        Fields that do not apply to a verdict are NaN.
        """
        rows = []
        for v in self.verdicts(X):
            rows.append([
                v.second_schmidt_coefficient,
                np.nan if v.eigen_residual is None else v.eigen_residual,
                np.nan if v.eigenvalue is None else v.eigenvalue,
            ])
        return np.array(rows, dtype=float).reshape(-1, 3)

    def fit_transform(self, X, y=None):
        return self.fit(X, y).transform(X)

    def compatible_mask(self, X):
        return self.predict(X) == VerdictKind.COMPATIBLE.value
