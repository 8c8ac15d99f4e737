"""scikit-learn style estimators wrapping the fitting routines.

Each estimator takes its hyperparameters in ``__init__`` (so ``get_params`` and
``set_params`` work), learns in ``fit`` and exposes fitted state through
trailing-underscore attributes. Binary inputs must contain only 0 and 1.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import baselines, hopfield
from .flow import PmpfConfig, ising_mpf_params, mpf_objective, pmpf_fit
from .models import IcaModel, IsingModel, RbmModel
from .optimize import OptimizerConfig, lbfgs_minimize
from .oracle import exact_loglik
from .samplers import HmcConfig
from .statespace import MAX_ENUM_DIM, Dataset


def _binary(X, sample_weight=None):
    X = check_array(X, dtype=None)
    if not np.all((X == 0) | (X == 1)):
        raise ValueError("X must contain only 0 and 1")
    if sample_weight is not None:
        w = np.asarray(sample_weight, dtype=np.float64)
        w = w / w.sum()
        return Dataset(X.astype(np.int8), weights=w)
    return Dataset(X.astype(np.int8))


def _check_width(est, X):
    if X.shape[1] != est.n_features_in_:
        raise ValueError(f"X has {X.shape[1]} features, estimator was fit with "
                         f"{est.n_features_in_}")


class _IsingBase(BaseEstimator):
    """Shared scoring for estimators that produce an ``IsingModel`` in ``model_``."""

    def _set_model(self, model, result=None):
        self.model_ = model
        self.coef_ = model.J
        self.n_features_in_ = model.d
        if result is not None:
            self.n_iter_ = result.n_iter
            self.converged_ = result.converged

    def score(self, X, sample_weight=None):
        """Exact mean log-likelihood (enumeration; ``d <= 20``)."""
        check_is_fitted(self, "model_")
        data = _binary(X, sample_weight)
        _check_width(self, data.rows)
        if data.d > MAX_ENUM_DIM:
            raise ValueError("exact likelihood needs d <= 20")
        return exact_loglik(self.model_, data)

    def energy(self, X):
        check_is_fitted(self, "model_")
        return self.model_.energy(_binary(X).rows)


class IsingMPF(_IsingBase):
    """Ising couplings by minimizing the probability-flow objective with L-BFGS.

    Parameters
    ----------
    allflip : bool
        Also connect every state to its complement.
    max_iter : int
    tol : float
        Stop when the largest gradient entry falls below this value.

    Attributes
    ----------
    coef_ : ndarray of shape (d, d)
        Symmetric couplings; the diagonal holds the biases.
    converged_ : bool
        False means the iteration limit was hit. On finite samples from
        strongly coupled models the objective can decrease without bound,
        in which case the result depends on ``max_iter``.
    """

    def __init__(self, allflip=False, max_iter=500, tol=1e-6):
        self.allflip = allflip
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y=None, sample_weight=None):
        data = _binary(X, sample_weight)
        d = data.d
        cfg = OptimizerConfig(max_iters=self.max_iter, grad_tol=self.tol)
        res = lbfgs_minimize(lambda th: ising_mpf_params(th, data, d, self.allflip),
                             IsingModel.zeros(d).params, cfg)
        self._set_model(IsingModel.from_params(d, res.x), res)
        self.objective_ = res.fun
        return self


class IsingPseudolikelihood(_IsingBase):
    """Ising couplings by maximizing the pseudolikelihood with L-BFGS."""

    def __init__(self, max_iter=500, tol=1e-6):
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y=None, sample_weight=None):
        data = _binary(X, sample_weight)
        fit = baselines.pl_fit(data, OptimizerConfig(max_iters=self.max_iter, grad_tol=self.tol))
        self._set_model(fit.model, fit.result)
        return self


class IsingMaxLikelihood(_IsingBase):
    """Exact maximum likelihood by enumeration (``d <= 20``).

    ``diverged_`` is set when no finite maximizer was reached.
    """

    def __init__(self, max_iter=500, tol=1e-6):
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y=None, sample_weight=None):
        data = _binary(X, sample_weight)
        fit = baselines.exact_ml_fit(IsingModel.zeros(data.d), data,
                                     OptimizerConfig(max_iters=self.max_iter, grad_tol=self.tol))
        self._set_model(fit.model, fit.result)
        self.diverged_ = fit.diverged
        return self


class IsingContrastiveDivergence(_IsingBase):
    """CD-k with a linearly annealed learning rate."""

    def __init__(self, k=1, lr_start=3.0, lr_end=0.1, batch_size=100, epochs=10,
                 scale_by_dim=True, random_state=None):
        self.k = k
        self.lr_start = lr_start
        self.lr_end = lr_end
        self.batch_size = batch_size
        self.epochs = epochs
        self.scale_by_dim = scale_by_dim
        self.random_state = random_state

    def _config(self):
        return baselines.CdConfig(self.k, self.lr_start, self.lr_end, self.batch_size,
                                  self.epochs, self.scale_by_dim)

    def fit(self, X, y=None):
        data = _binary(X)
        fit = baselines.cd_fit(IsingModel.zeros(data.d), data, self._config(),
                               np.random.default_rng(self.random_state))
        self._set_model(fit.model)
        return self


class RBMMPF(BaseEstimator, TransformerMixin):
    """Hidden-marginalized RBM weights by minimizing the flow objective.

    ``transform`` returns the hidden activation probabilities.
    """

    def __init__(self, n_hidden=4, max_iter=500, tol=1e-6, init_scale=0.01,
                 random_state=None):
        self.n_hidden = n_hidden
        self.max_iter = max_iter
        self.tol = tol
        self.init_scale = init_scale
        self.random_state = random_state

    def fit(self, X, y=None, sample_weight=None):
        data = _binary(X, sample_weight)
        rng = np.random.default_rng(self.random_state)
        model = RbmModel(self.init_scale * rng.standard_normal((self.n_hidden, data.d)))
        cfg = OptimizerConfig(max_iters=self.max_iter, grad_tol=self.tol)
        res = lbfgs_minimize(lambda th: mpf_objective(model.with_params(th), data),
                             model.params, cfg)
        self.model_ = model.with_params(res.x)
        self.components_ = self.model_.W
        self.n_features_in_ = data.d
        self.n_iter_ = res.n_iter
        self.converged_ = res.converged
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        V = _binary(X).rows
        _check_width(self, V)
        return self.model_.hidden_prob(V)

    def score(self, X):
        check_is_fitted(self, "model_")
        return exact_loglik(self.model_, _binary(X))


class _HopfieldBase(BaseEstimator):
    """``predict`` relaxes each row to a fixed point of the dynamics."""

    max_sweeps = 100

    def predict(self, X):
        check_is_fitted(self, "net_")
        X = _binary(X).rows
        _check_width(self, X)
        out, _, _ = hopfield.converge(self.net_, X, self.max_sweeps)
        return out

    def score(self, X):
        """Fraction of rows that are exact fixed points."""
        check_is_fitted(self, "net_")
        return hopfield.fixed_point_fraction(self.net_, _binary(X).rows)

    def _set_net(self, net):
        self.net_ = net
        self.coef_ = net.J
        self.intercept_ = net.theta
        self.n_features_in_ = net.n


class HopfieldMPF(_HopfieldBase):
    """Store patterns by minimizing the flow objective with L-BFGS."""

    def __init__(self, max_iter=500, tol=1e-6):
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y=None):
        net, res = hopfield.train_mpf(_binary(X).rows,
                                      OptimizerConfig(max_iters=self.max_iter, grad_tol=self.tol))
        self._set_net(net)
        self.n_iter_ = res.n_iter
        self.converged_ = res.converged
        return self


class HopfieldOPR(_HopfieldBase):
    """Outer-product rule."""

    def fit(self, X, y=None):
        self._set_net(hopfield.opr_train(_binary(X).rows))
        return self


class HopfieldPerceptron(_HopfieldBase):
    """Symmetrized perceptron rule."""

    def __init__(self, eta=1.0, max_epochs=1000):
        self.eta = eta
        self.max_epochs = max_epochs

    def fit(self, X, y=None):
        net, ok = hopfield.per_train(_binary(X).rows, self.eta, self.max_epochs)
        self._set_net(net)
        self.converged_ = ok
        return self


class _IcaBase(BaseEstimator, TransformerMixin):
    def transform(self, X):
        """Source estimates ``J x``."""
        check_is_fitted(self, "model_")
        X = check_array(X)
        _check_width(self, X)
        return X @ self.model_.J.T

    def score(self, X):
        """Exact mean log-likelihood."""
        check_is_fitted(self, "model_")
        return self.model_.loglik(Dataset(check_array(X), kind="continuous"))[0]

    def _set_model(self, model):
        self.model_ = model
        self.components_ = model.J
        self.n_features_in_ = model.d


class ICAMaxLikelihood(_IcaBase):
    """Laplace-prior ICA by L-BFGS on the exact likelihood."""

    def __init__(self, max_iter=500, tol=1e-6):
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y=None):
        data = Dataset(check_array(X), kind="continuous")
        k = data.d

        def fun(theta):
            L, g = IcaModel(theta.reshape(k, k)).loglik(data)
            return -L, -g.ravel()

        res = lbfgs_minimize(fun, np.eye(k).ravel(),
                             OptimizerConfig(max_iters=self.max_iter, grad_tol=self.tol))
        self._set_model(IcaModel(res.x.reshape(k, k)))
        self.n_iter_ = res.n_iter
        self.converged_ = res.converged
        return self


class ICAPersistentMPF(_IcaBase):
    """Laplace-prior ICA by persistent MPF with HMC-refreshed particles."""

    def __init__(self, outer_iters=50, inner_descent_steps=10, leapfrog_steps=20,
                 step_size=0.1, random_state=None):
        self.outer_iters = outer_iters
        self.inner_descent_steps = inner_descent_steps
        self.leapfrog_steps = leapfrog_steps
        self.step_size = step_size
        self.random_state = random_state

    def fit(self, X, y=None):
        data = Dataset(check_array(X), kind="continuous")
        cfg = PmpfConfig(self.outer_iters, self.inner_descent_steps,
                         HmcConfig(self.leapfrog_steps, self.step_size))
        model, trace = pmpf_fit(IcaModel(np.eye(data.d)), data, cfg,
                                np.random.default_rng(self.random_state))
        self._set_model(model)
        self.trace_ = trace
        return self
