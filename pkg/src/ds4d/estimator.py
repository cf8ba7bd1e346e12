"""Scikit-learn style estimator facade over the full pipeline.

``DS4DReconstructor.fit`` takes a rendered dataset (or a dataset directory)
and trains the two-stage model; ``predict`` renders frames for requested
(time, view) pairs and ``score`` returns mean held-out PSNR. Constructor
arguments mirror ``TrainConfig`` fields so the estimator composes with
``sklearn.base.clone`` and parameter search utilities.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from sklearn.base import BaseEstimator

from .errors import ConfigError, DataError
from .io import load_dataset
from .metrics import MetricReport
from .render import splat_render
from .scene import SceneDataset
from .train import (TrainConfig, evaluate, model_forward, prepare_features,
                    train_full)


def as_dataset(X, n_train_views: int | None = None) -> SceneDataset:
    """Accept a SceneDataset or a dataset directory path."""
    if isinstance(X, SceneDataset):
        return X
    if isinstance(X, (str, bytes)) or hasattr(X, "__fspath__"):
        return load_dataset(X, n_train_views=n_train_views)
    raise DataError(f"expected a SceneDataset or dataset path, got {type(X).__name__}")


def check_dataset(dataset: SceneDataset) -> SceneDataset:
    """Validate the invariants fit() relies on."""
    if dataset.n_frames < 2:
        raise DataError("dataset needs at least 2 frames")
    if dataset.n_views < 2:
        raise DataError("dataset needs at least 2 views")
    if not (1 <= dataset.n_train_views <= dataset.n_views):
        raise DataError("n_train_views outside [1, n_views]")
    if dataset.images.shape[:2] != dataset.masks.shape[:2]:
        raise DataError("images and masks disagree on (frames, views)")
    if not np.all(np.isfinite(dataset.images)):
        raise DataError("images contain non-finite values")
    return dataset


class DS4DReconstructor(BaseEstimator):
    """Fit a deformable Gaussian point model to a multi-view video.

    Parameters mirror the training configuration; anything not exposed
    directly can be passed through ``extra_config``. After ``fit`` the
    trained state lives in ``model_`` and the training trace in ``log_``.
    """

    def __init__(self, n_points: int = 200, fusion_mode: str = "ga",
                 decouple_mode: str = "concat-both", warmup_iters: int = 500,
                 dynamic_iters: int = 1500, lr_start: float = 1.6e-4,
                 lr_end: float = 1.6e-6, densify_interval: int = 100,
                 densify_fraction: float = 0.025, seed: int = 0,
                 extra_config: dict | None = None):
        self.n_points = n_points
        self.fusion_mode = fusion_mode
        self.decouple_mode = decouple_mode
        self.warmup_iters = warmup_iters
        self.dynamic_iters = dynamic_iters
        self.lr_start = lr_start
        self.lr_end = lr_end
        self.densify_interval = densify_interval
        self.densify_fraction = densify_fraction
        self.seed = seed
        self.extra_config = extra_config

    def _train_config(self) -> TrainConfig:
        base = TrainConfig(
            n_points=self.n_points, fusion_mode=self.fusion_mode,
            decouple_mode=self.decouple_mode, warmup_iters=self.warmup_iters,
            dynamic_iters=self.dynamic_iters, lr_start=self.lr_start,
            lr_end=self.lr_end, densify_interval=self.densify_interval,
            densify_fraction=self.densify_fraction, seed=self.seed)
        if self.extra_config:
            known = {f.name for f in dataclasses.fields(TrainConfig)}
            unknown = set(self.extra_config) - known
            if unknown:
                raise ConfigError(f"unknown extra_config keys: {sorted(unknown)}")
            base = dataclasses.replace(base, **self.extra_config)
        return base

    def fit(self, X, y=None) -> "DS4DReconstructor":
        """Train on a SceneDataset (or dataset directory); returns self."""
        dataset = check_dataset(as_dataset(X))
        cfg = self._train_config()
        self.model_, self.log_ = train_full(dataset, cfg)
        self.dataset_ = dataset
        self.config_ = cfg
        self.dec_tokens_ = prepare_features(dataset, cfg)
        return self

    def _require_fit(self):
        if not hasattr(self, "model_"):
            raise DataError("estimator is not fitted; call fit first")

    def predict(self, X=None) -> np.ndarray:
        """Render frames; X is an iterable of (time, view) pairs (default:
        every held-out (i, j)). Returns (n, h, w, 3) images."""
        self._require_fit()
        ds = self.dataset_
        if X is None:
            X = [(i, j) for i in range(ds.n_frames) for j in ds.holdout_views()]
        images = []
        for i, j in X:
            moved = model_forward(self.model_, ds, self.dec_tokens_, int(i))
            images.append(splat_render(moved, ds.cameras[int(j)]).rgb_array())
        return np.stack(images)

    def score(self, X=None, y=None) -> float:
        """Mean PSNR over held-out views of the fitted dataset."""
        self._require_fit()
        return self.report().mean_psnr

    def report(self, views=None) -> MetricReport:
        self._require_fit()
        return evaluate(self.model_, self.dataset_, self.dec_tokens_, views=views)
