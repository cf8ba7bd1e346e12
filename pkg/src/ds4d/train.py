"""Two-stage optimization: static warmup, then dynamic fitting of the
fusion/field/deformation stack, with gradient-driven densification.

Stage one fits point positions, scales, opacities, and colors to the
middle-frame images of the training views; the fusion scorers, field grids,
mixer, and deformation MLP are untouched. Stage two samples one timestamp
per iteration, runs retrieval -> fusion -> field query -> mixer -> MLP ->
deformation -> render over all training views, and steps every parameter
group, decaying the net learning rate exponentially. Every
``densify_interval`` iterations the points with the largest accumulated
positional gradient are cloned.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .decouple import DECOUPLE_MODES, decouple_all, select_references
from .deform import apply_deformation, deform
from .errors import ConfigError, OptimizerError
from .features import extract_feature_set
from .fusion import average_fuse, da_fuse, fuse_gaussian_features, ga_fuse
from .hexplane import HexPlaneField, hexplane_query, init_hexplane
from .losses import LossWeights, loss_mask, loss_perceptual_proxy, loss_rec
from .metrics import MetricReport
from .nn import AdamState, LinearLayer, Mlp, adam_step, init_linear, init_mlp
from .points import GaussianPointSet, init_points, retrieve_point_features
from .render import splat_render
from .scene import SceneDataset

FUSION_MODES = ("ga", "da", "avg", "front", "global", "none")

ABLATION_VARIANTS = (
    "baseline", "point-init", "frame-features", "dsfd",
    "tssf-avg", "tssf-ga", "tssf-da",
)


@dataclass
class TrainConfig:
    """Everything the trainer needs; field defaults are the desk-scale run."""

    warmup_iters: int = 500
    dynamic_iters: int = 1500
    lr_start: float = 1.6e-4
    lr_end: float = 1.6e-6
    densify_interval: int = 100
    densify_fraction: float = 0.025
    batch: int = 1
    seed: int = 0
    fusion_mode: str = "ga"
    decouple_mode: str = "concat-both"
    use_frame_features: bool = True
    use_decoupling: bool = True
    use_proxy_loss: bool = True
    point_init: bool = True
    n_points: int = 200
    feature_grid: int = 8
    feature_dim: int = 64
    hexplane_base: int = 16
    hexplane_multipliers: tuple = (1, 2, 4)
    hexplane_channels: int = 8
    hexplane_lr: float = 5e-3
    mixer_out: int = 32
    mlp_hidden_layers: int = 2
    mlp_hidden_width: int = 64
    static_lr_pos: float = 2e-3
    static_lr_scale: float = 2.5e-3
    static_lr_opacity: float = 2.5e-2
    static_lr_color: float = 5e-3
    dynamic_lr_pos: float = 2e-4
    dynamic_lr_scale: float = 1e-3
    dynamic_lr_opacity: float = 5e-3
    dynamic_lr_color: float = 1e-3
    lambda_rec: float = 1.0
    lambda_mask: float = 0.5
    lambda_proxy: float = 0.1
    bounds_pad: float = 0.4

    def __post_init__(self):
        if not (self.lr_start >= self.lr_end > 0):
            raise ConfigError("need lr_start >= lr_end > 0")
        if not (0.0 < self.densify_fraction <= 0.5):
            raise ConfigError("densify_fraction must lie in (0, 0.5]")
        if self.fusion_mode not in FUSION_MODES:
            raise ConfigError(
                f"unknown fusion_mode {self.fusion_mode!r}; expected one of {FUSION_MODES}")
        if self.decouple_mode not in DECOUPLE_MODES:
            raise ConfigError(f"unknown decouple_mode {self.decouple_mode!r}")
        if self.batch < 1:
            raise ConfigError("batch must be >= 1")

    def loss_weights(self) -> LossWeights:
        return LossWeights(
            lambda_rec=self.lambda_rec, lambda_mask=self.lambda_mask,
            lambda_proxy=self.lambda_proxy if self.use_proxy_loss else 0.0)


def lr_schedule(step: int, total: int, lr_start: float, lr_end: float) -> float:
    """Exponential interpolation from lr_start at step 0 to lr_end at total."""
    if total <= 0:
        return lr_start
    frac = min(max(step / total, 0.0), 1.0)
    return lr_start * (lr_end / lr_start) ** frac


@dataclass
class GradAccumulator:
    """Running sum of positional-gradient norms since the last densify."""

    grad_sum: np.ndarray
    count: int = 0

    @classmethod
    def zeros(cls, n: int) -> "GradAccumulator":
        return cls(grad_sum=np.zeros(n), count=0)

    def update(self, pos_grad: np.ndarray) -> None:
        self.grad_sum += np.linalg.norm(pos_grad, axis=1)
        self.count += 1

    def reset(self, n: int) -> None:
        self.grad_sum = np.zeros(n)
        self.count = 0


def densify(points: GaussianPointSet, acc: GradAccumulator, fraction: float,
            rng: np.random.Generator) -> GaussianPointSet:
    """Clone the top-fraction points by accumulated gradient.

    Clones are offset by 0.3 * scale along a seeded random direction and get
    half the parent scale; ties in the score break toward lower indices, so
    the result is deterministic. The caller resets the accumulator.
    """
    n = len(points)
    k = int(np.ceil(fraction * n))
    order = np.lexsort((np.arange(n), -acc.grad_sum))
    top = order[:k]
    direction = rng.standard_normal((k, 3))
    direction /= np.maximum(np.linalg.norm(direction, axis=1, keepdims=True), 1e-12)
    parent_pos = points.positions.data[top]
    parent_scale = points.scales.data[top]
    new_pos = parent_pos + 0.3 * parent_scale[:, None] * direction
    return GaussianPointSet.from_arrays(
        np.concatenate([points.positions.data, new_pos]),
        np.concatenate([points.scales.data, 0.5 * parent_scale]),
        np.concatenate([points.rotations.data, points.rotations.data[top]]),
        np.concatenate([points.opacities.data, points.opacities.data[top]]),
        np.concatenate([points.colors.data, points.colors.data[top]]),
        requires_grad=points.positions.requires_grad,
    )


# -- model assembly --------------------------------------------------------------


@dataclass
class DS4DModel:
    """All trainable state of the dynamic stage."""

    points: GaussianPointSet
    field: HexPlaneField
    mixer: LinearLayer | None = None
    deform_net: Mlp | None = None
    scorer: LinearLayer | None = None
    scorer_a: LinearLayer | None = None
    scorer_b: LinearLayer | None = None
    fusion_mode: str = "ga"
    feature_width: int = 0

    def net_parameters(self) -> list[Tensor]:
        params = []
        for layer in (self.scorer, self.scorer_a, self.scorer_b, self.mixer):
            if layer is not None:
                params.extend(layer.parameters())
        params.extend(self.deform_net.parameters())
        return params

    def fused_width(self) -> int:
        if self.fusion_mode == "none" or self.feature_width == 0:
            return 0
        return 2 * self.feature_width if self.fusion_mode == "da" else self.feature_width


def prepare_features(dataset: SceneDataset, cfg: TrainConfig) -> np.ndarray | None:
    """Frame features of the training views, decoupled when configured.

    Returns (T, V_train, P, width) tokens, or None when the feature path is
    disabled.
    """
    if not cfg.use_frame_features:
        return None
    train = dataset.images[:, dataset.train_views()]
    feats = extract_feature_set(train, cfg.feature_grid, cfg.feature_dim)
    if not cfg.use_decoupling:
        return feats.tokens
    refs = select_references(feats)
    return decouple_all(feats, refs, mode=cfg.decouple_mode).tokens


def initial_points(dataset: SceneDataset, cfg: TrainConfig,
                   rng: np.random.Generator,
                   cloud: tuple[np.ndarray, np.ndarray] | None = None) -> GaussianPointSet:
    """Point-cloud init when enabled, otherwise a random ball in the scene
    bounds (the no-init ablation)."""
    if cfg.point_init:
        if cloud is None:
            cloud = dataset.gt_cloud()
        return init_points(cloud[0], cloud[1], cfg.n_points, rng, requires_grad=True)
    pos = rng.uniform(-0.8, 0.8, (cfg.n_points, 3))
    col = rng.uniform(0.2, 0.8, (cfg.n_points, 3))
    return init_points(pos, col, cfg.n_points, rng, requires_grad=True)


def scene_bounds(points: GaussianPointSet, pad: float) -> tuple[np.ndarray, np.ndarray]:
    lo = points.positions.data.min(axis=0)
    hi = points.positions.data.max(axis=0)
    span = np.maximum(hi - lo, 0.2)
    return lo - pad * span, hi + pad * span


def build_model(points: GaussianPointSet, dataset: SceneDataset, cfg: TrainConfig,
                feature_width: int, rng: np.random.Generator) -> DS4DModel:
    lo, hi = scene_bounds(points, cfg.bounds_pad)
    field = init_hexplane(lo, hi, rng, base_resolution=cfg.hexplane_base,
                          level_multipliers=cfg.hexplane_multipliers,
                          channels=cfg.hexplane_channels)
    model = DS4DModel(points=points, field=field,
                      fusion_mode=cfg.fusion_mode if cfg.use_frame_features else "none",
                      feature_width=feature_width if cfg.use_frame_features else 0)
    if model.feature_width:
        # Zero-init scorers: the softmax starts uniform, so learned fusion
        # begins exactly at average pooling and refines from there.
        if model.fusion_mode == "ga":
            model.scorer = init_linear(feature_width, 1, rng, zero=True, name="scorer")
        elif model.fusion_mode == "da":
            model.scorer_a = init_linear(2 * feature_width, 1, rng, zero=True,
                                         name="scorer_a")
            model.scorer_b = init_linear(2 * feature_width, 1, rng, zero=True,
                                         name="scorer_b")
    extras_width = 6  # scale, quaternion, opacity
    mixer_in = field.out_width + model.fused_width() + extras_width
    model.mixer = init_linear(mixer_in, cfg.mixer_out, rng, name="mixer")
    hidden = [cfg.mlp_hidden_width] * cfg.mlp_hidden_layers
    model.deform_net = init_mlp(cfg.mixer_out, hidden, 8, rng, zero_final=True,
                                name="deform")
    return model


def _point_extras(points: GaussianPointSet) -> Tensor:
    n = len(points)
    return ad.concat([
        points.scales.reshape((n, 1)),
        points.rotations,
        points.opacities.reshape((n, 1)),
    ], axis=1)


def model_forward(model: DS4DModel, dataset: SceneDataset,
                  dec_tokens: np.ndarray | None, i: int) -> GaussianPointSet:
    """Deformed point set at timestamp ``i``; differentiable end to end.

    Retrieved features enter as constants for the iteration; gradients
    reach the point positions through the field query and the renderer.
    """
    points = model.points
    f_a = None
    if model.feature_width and dec_tokens is not None and model.fusion_mode == "global":
        code = dec_tokens[i].mean(axis=(0, 1))
        f_a = Tensor(np.broadcast_to(code, (len(points), code.size)).copy())
    elif model.feature_width and dec_tokens is not None:
        cams = [dataset.cameras[j] for j in dataset.train_views()]
        pf = retrieve_point_features(points, dec_tokens[i], cams, i)
        feats = Tensor(pf.features)
        if model.fusion_mode == "ga":
            f_a = ga_fuse(feats, pf.valid, model.scorer).fused
        elif model.fusion_mode == "da":
            f_a = da_fuse(feats, pf.valid, model.scorer_a, model.scorer_b).fused
        elif model.fusion_mode == "avg":
            f_a = average_fuse(feats, pf.valid).fused
        else:  # front-view passthrough
            f_a = Tensor(pf.features[:, 0, :])
    f_hg = hexplane_query(model.field, points.positions, dataset.time_norm(i))
    fused = fuse_gaussian_features(f_hg, f_a, model.mixer, _point_extras(points))
    return apply_deformation(points, deform(fused, model.deform_net))


def render_view(model: DS4DModel, dataset: SceneDataset,
                dec_tokens: np.ndarray | None, i: int, j: int,
                background=(0.0, 0.0, 0.0)):
    moved = model_forward(model, dataset, dec_tokens, i)
    return splat_render(moved, dataset.cameras[j], background)


# -- stages ------------------------------------------------------------------------


@dataclass
class LogRow:
    iteration: int
    loss_total: float
    loss_rec: float
    loss_mask: float
    loss_proxy: float
    lr: float
    num_points: int

    def csv(self) -> str:
        return (f"{self.iteration},{self.loss_total:.17g},{self.loss_rec:.17g},"
                f"{self.loss_mask:.17g},{self.loss_proxy:.17g},{self.lr:.17g},"
                f"{self.num_points}")


def _batch_loss(frames, gts, msks, weights: LossWeights):
    """Weighted objective over one batch plus its per-term values."""
    def mean_of(terms):
        total = terms[0]
        for t in terms[1:]:
            total = total + t
        return total * (1.0 / len(terms))

    rec = mean_of([loss_rec(f.rgb, g) for f, g in zip(frames, gts)])
    msk = mean_of([loss_mask(f.alpha, m) for f, m in zip(frames, msks)])
    total = weights.lambda_rec * rec + weights.lambda_mask * msk
    prox_val = 0.0
    if weights.lambda_proxy:
        prox = mean_of([loss_perceptual_proxy(f.rgb, g) for f, g in zip(frames, gts)])
        total = total + weights.lambda_proxy * prox
        prox_val = prox.item()
    return total, rec.item(), msk.item(), prox_val


def train_static_stage(points: GaussianPointSet, dataset: SceneDataset,
                       cfg: TrainConfig) -> list[LogRow]:
    """Warmup on the middle frame of every training view; only the point
    attributes move."""
    mid = dataset.middle_index()
    views = dataset.train_views()
    gts = [dataset.images[mid, j] for j in views]
    msks = [dataset.masks[mid, j] for j in views]
    weights = cfg.loss_weights()
    groups = [
        ([points.positions], cfg.static_lr_pos),
        ([points.scales], cfg.static_lr_scale),
        ([points.opacities], cfg.static_lr_opacity),
        ([points.colors], cfg.static_lr_color),
    ]
    states = [AdamState.for_params(params) for params, _ in groups]
    log: list[LogRow] = []
    for step in range(cfg.warmup_iters):
        frames = [splat_render(points, dataset.cameras[j]) for j in views]
        loss, rec, msk, prox = _batch_loss(frames, gts, msks, weights)
        value = loss.item()
        if not np.isfinite(value):
            raise OptimizerError(f"static stage diverged at iteration {step}")
        for p in points.trainable():
            p.zero_grad()
        loss.backward()
        for (params, lr), state in zip(groups, states):
            adam_step(params, [p.grad for p in params], state, lr)
        points.clamp_invariants()
        log.append(LogRow(step, value, rec, msk, prox, cfg.static_lr_pos, len(points)))
    return log


def train_dynamic_stage(model: DS4DModel, dataset: SceneDataset,
                        dec_tokens: np.ndarray | None,
                        cfg: TrainConfig) -> list[LogRow]:
    """Fit the dynamic stack; see the module docstring for the loop body."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    views = dataset.train_views()
    weights = cfg.loss_weights()
    acc = GradAccumulator.zeros(len(model.points))

    point_groups = [
        ("pos", lambda: [model.points.positions], cfg.dynamic_lr_pos),
        ("scale", lambda: [model.points.scales], cfg.dynamic_lr_scale),
        ("opacity", lambda: [model.points.opacities], cfg.dynamic_lr_opacity),
        ("color", lambda: [model.points.colors], cfg.dynamic_lr_color),
    ]
    point_states = {name: AdamState.for_params(get()) for name, get, _ in point_groups}
    field_params = model.field.parameters()
    field_state = AdamState.for_params(field_params)
    net_params = model.net_parameters()
    net_state = AdamState.for_params(net_params)

    log: list[LogRow] = []
    for step in range(cfg.dynamic_iters):
        timestamps = [int(rng.integers(0, dataset.n_frames)) for _ in range(cfg.batch)]
        frames, gts, msks = [], [], []
        for i in timestamps:
            moved = model_forward(model, dataset, dec_tokens, i)
            for j in views:
                frames.append(splat_render(moved, dataset.cameras[j]))
                gts.append(dataset.images[i, j])
                msks.append(dataset.masks[i, j])
        loss, rec, msk, prox = _batch_loss(frames, gts, msks, weights)
        value = loss.item()
        if not np.isfinite(value):
            raise OptimizerError(
                f"dynamic stage hit non-finite loss at iteration {step}, "
                f"timestamps {timestamps}")
        all_params = ([p for _, get, _ in point_groups for p in get()]
                      + field_params + net_params)
        for p in all_params:
            p.zero_grad()
        loss.backward()

        if model.points.positions.grad is not None:
            acc.update(model.points.positions.grad)

        lr_net = lr_schedule(step, cfg.dynamic_iters, cfg.lr_start, cfg.lr_end)
        for name, get, lr in point_groups:
            params = get()
            adam_step(params, [p.grad for p in params], point_states[name], lr)
        adam_step(field_params, [p.grad for p in field_params], field_state,
                  cfg.hexplane_lr)
        adam_step(net_params, [p.grad for p in net_params], net_state, lr_net)
        model.points.clamp_invariants()

        log.append(LogRow(step, value, rec, msk, prox, lr_net, len(model.points)))

        if cfg.densify_interval and (step + 1) % cfg.densify_interval == 0 \
                and step + 1 < cfg.dynamic_iters:
            model.points = densify(model.points, acc, cfg.densify_fraction, rng)
            acc.reset(len(model.points))
            for name, get, _ in point_groups:
                point_states[name].extend(get())
    return log


def train_full(dataset: SceneDataset, cfg: TrainConfig,
               cloud: tuple[np.ndarray, np.ndarray] | None = None
               ) -> tuple[DS4DModel, list[LogRow]]:
    """Full pipeline: features, decoupling, init, both stages."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0]))
    dec_tokens = prepare_features(dataset, cfg)
    feature_width = dec_tokens.shape[3] if dec_tokens is not None else 0
    points = initial_points(dataset, cfg, rng, cloud)
    static_log = train_static_stage(points, dataset, cfg)
    model = build_model(points, dataset, cfg, feature_width, rng)
    dynamic_log = train_dynamic_stage(model, dataset, dec_tokens, cfg)
    return model, static_log + dynamic_log


def evaluate(model: DS4DModel, dataset: SceneDataset,
             dec_tokens: np.ndarray | None, views=None) -> MetricReport:
    """PSNR/SSIM/D-SSIM against ground truth on the given views (default:
    the held-out ones) over every timestamp."""
    report = MetricReport()
    views = dataset.holdout_views() if views is None else list(views)
    for i in range(dataset.n_frames):
        moved = model_forward(model, dataset, dec_tokens, i)
        for j in views:
            frame = splat_render(moved, dataset.cameras[j])
            report.add(i, j, frame.rgb_array(), dataset.images[i, j])
    return report


# -- ablation ladder -------------------------------------------------------------------


def variant_config(base: TrainConfig, variant: str) -> TrainConfig:
    """Map a named ablation variant onto config toggles.

    Each row modifies the previous: the baseline has neither point init nor
    image features nor the perceptual term; point-init adds the cloud init;
    frame-features retrieves raw (undecoupled) per-point features from the
    front view and adds the perceptual term; dsfd decouples them; tssf-avg
    extends retrieval to every view with average pooling; tssf-ga and
    tssf-da switch to learned fusion.
    """
    name = variant.lstrip("+").lower()
    if name not in ABLATION_VARIANTS:
        raise ConfigError(
            f"unknown ablation variant {variant!r}; expected one of {ABLATION_VARIANTS}")
    toggles = {
        "baseline": dict(point_init=False, use_frame_features=False, use_proxy_loss=False),
        "point-init": dict(point_init=True, use_frame_features=False, use_proxy_loss=False),
        "frame-features": dict(point_init=True, use_frame_features=True,
                               use_decoupling=False, fusion_mode="front",
                               use_proxy_loss=True),
        "dsfd": dict(point_init=True, use_frame_features=True, use_decoupling=True,
                     fusion_mode="front", use_proxy_loss=True),
        "tssf-avg": dict(point_init=True, use_frame_features=True, use_decoupling=True,
                         fusion_mode="avg", use_proxy_loss=True),
        "tssf-ga": dict(point_init=True, use_frame_features=True, use_decoupling=True,
                        fusion_mode="ga", use_proxy_loss=True),
        "tssf-da": dict(point_init=True, use_frame_features=True, use_decoupling=True,
                        fusion_mode="da", use_proxy_loss=True),
    }[name]
    return dataclasses.replace(base, **toggles)


@dataclass
class AblationRow:
    variant: str
    psnr: float
    ssim: float
    dssim: float
    num_points: int


def run_ablation(dataset: SceneDataset, variants, cfg: TrainConfig,
                 cloud: tuple[np.ndarray, np.ndarray] | None = None) -> list[AblationRow]:
    """Train each variant with the shared seed and score held-out views.

    Variants sharing an initialization mode and warmup loss reuse one
    static-stage result; the warmup never touches variant-specific
    parameters, so this is bit-identical to rerunning it.
    """
    rows: list[AblationRow] = []
    warm_cache: dict[tuple, GaussianPointSet] = {}
    for variant in variants:
        vcfg = variant_config(cfg, variant)
        rng = np.random.default_rng(np.random.SeedSequence([vcfg.seed, 0]))
        dec_tokens = prepare_features(dataset, vcfg)
        feature_width = dec_tokens.shape[3] if dec_tokens is not None else 0
        points = initial_points(dataset, vcfg, rng, cloud)
        warm_key = (vcfg.point_init, vcfg.use_proxy_loss)
        if warm_key not in warm_cache:
            train_static_stage(points, dataset, vcfg)
            warm_cache[warm_key] = points.copy(requires_grad=False)
        points = warm_cache[warm_key].copy(requires_grad=True)
        model = build_model(points, dataset, vcfg, feature_width, rng)
        train_dynamic_stage(model, dataset, dec_tokens, vcfg)
        report = evaluate(model, dataset, dec_tokens)
        rows.append(AblationRow(variant=variant, psnr=report.mean_psnr,
                                ssim=report.mean_ssim, dssim=report.mean_dssim,
                                num_points=len(model.points)))
    return rows


# -- checkpointing ------------------------------------------------------------------


def checkpoint_arrays(model: DS4DModel) -> dict[str, np.ndarray]:
    arrays: dict[str, np.ndarray] = {
        "points.positions": model.points.positions.data,
        "points.scales": model.points.scales.data,
        "points.rotations": model.points.rotations.data,
        "points.opacities": model.points.opacities.data,
        "points.colors": model.points.colors.data,
        "field.bounds": np.stack([model.field.bounds_min, model.field.bounds_max]),
    }
    for (level, plane), grid in model.field.grids.items():
        arrays[f"field.l{level}.p{plane}"] = grid.data
    for name in ("scorer", "scorer_a", "scorer_b", "mixer"):
        layer = getattr(model, name)
        if layer is not None:
            arrays[f"{name}.weight"] = layer.weight.data
            arrays[f"{name}.bias"] = layer.bias.data
    for k, layer in enumerate(model.deform_net.layers):
        arrays[f"deform.{k}.weight"] = layer.weight.data
        arrays[f"deform.{k}.bias"] = layer.bias.data
    return arrays


def model_from_checkpoint(arrays: dict[str, np.ndarray], cfg: TrainConfig,
                          feature_width: int) -> DS4DModel:
    """Rebuild a model from checkpoint arrays (float32 quantized)."""
    points = GaussianPointSet.from_arrays(
        arrays["points.positions"], arrays["points.scales"],
        arrays["points.rotations"], arrays["points.opacities"],
        arrays["points.colors"], requires_grad=False)
    lo, hi = arrays["field.bounds"]
    field = init_hexplane(lo, hi, np.random.default_rng(0),
                          base_resolution=cfg.hexplane_base,
                          level_multipliers=cfg.hexplane_multipliers,
                          channels=cfg.hexplane_channels)
    for (level, plane) in field.grids:
        field.grids[(level, plane)] = Tensor(arrays[f"field.l{level}.p{plane}"],
                                             name=f"field.l{level}.p{plane}")
    fusion_mode = cfg.fusion_mode if cfg.use_frame_features else "none"
    model = DS4DModel(points=points, field=field, fusion_mode=fusion_mode,
                      feature_width=feature_width)

    def load_layer(name):
        if f"{name}.weight" not in arrays:
            return None
        return LinearLayer(Tensor(arrays[f"{name}.weight"], name=f"{name}.weight"),
                           Tensor(arrays[f"{name}.bias"], name=f"{name}.bias"))

    model.scorer = load_layer("scorer")
    model.scorer_a = load_layer("scorer_a")
    model.scorer_b = load_layer("scorer_b")
    model.mixer = load_layer("mixer")
    layers = []
    k = 0
    while f"deform.{k}.weight" in arrays:
        layers.append(load_layer(f"deform.{k}"))
        k += 1
    model.deform_net = Mlp(layers, "leaky")
    return model
