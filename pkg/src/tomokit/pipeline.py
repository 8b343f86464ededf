"""Declarative reconstruction pipelines.

A pipeline config (YAML) declares an input (phantom simulation, native
container or TIFF stack), an ordered list of preprocessing stages, an
optional reconstruction and a list of outputs.  The config is validated
completely before any computation starts; validation errors name the
offending field by its dotted path.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import fileio, simulation
from .algorithms import (CGLS, FISTA, GD, LADMM, PDHG, SIRT,
                         write_history_csv)
from .containers import BlockContainer, LabeledArray
from .fbp import FilterSpec, fbp_parallel
from .functions import (BlockFunction, IndicatorBox, KullbackLeibler,
                        L1Norm, L2NormSquared, LeastSquares, MixedL21Norm,
                        OperatorCompositionFunction, SmoothMixedL21Norm,
                        TotalVariation, ZeroFunction)
from .geometry import (AcquisitionGeometry, GeometryError, ImageGeometry,
                       cone_beam_3d, default_image_geometry, fan_beam_2d,
                       parallel_beam_2d, parallel_beam_3d)
from .operators import (BlockOperator, FiniteDifferenceOperator,
                        GradientOperator, IdentityOperator,
                        ProjectionOperator, ZeroOperator)
from .processors import (Binner, CentreOfRotationCorrector, MaskGenerator,
                         Masker, Normaliser, Padder, RingRemover, Slicer)


class ConfigError(ValueError):
    """Invalid pipeline configuration; the message names the field."""


class PipelineRuntimeError(RuntimeError):
    """A validated pipeline failed while executing."""


GOLDEN_STEP_DEG = (math.sqrt(5.0) - 1.0) / 2.0 * 180.0

SOLVERS = ("fbp", "cgls", "sirt", "gd", "fista", "pdhg", "ladmm")
STAGE_KINDS = ("scale_slice_mean", "neglog", "centre_of_rotation", "slice",
               "bin", "pad", "ring_remove", "normalise", "mask")
OUTPUT_KINDS = ("native", "tiff", "png", "history_csv", "metrics")


def _require(mapping, key, path, types=None):
    if not isinstance(mapping, dict):
        raise ConfigError(f"{path}: expected a mapping")
    if key not in mapping:
        raise ConfigError(f"{path}.{key}: required field is missing")
    value = mapping[key]
    if types is not None and not isinstance(value, types):
        raise ConfigError(f"{path}.{key}: unexpected type "
                          f"{type(value).__name__}")
    return value


def _optional(mapping, key, default=None):
    if not isinstance(mapping, dict):
        return default
    return mapping.get(key, default)


def _check_choice(value, choices, path):
    if value not in choices:
        raise ConfigError(f"{path}: unknown value {value!r}; expected one "
                          f"of {sorted(choices)}")
    return value


def load_config(source):
    """Load a config mapping from a YAML path or pass a dict through."""
    if isinstance(source, dict):
        return source
    with open(source, "r") as fh:
        try:
            cfg = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config: invalid YAML ({exc})") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config: top level must be a mapping")
    return cfg


def apply_overrides(cfg, overrides):
    """Set dotted-path leaves: ``recon.iterations=500``."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key=value")
        key, raw = item.split("=", 1)
        value = yaml.safe_load(raw)
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                node[part] = {}
            node = node[part]
        node[parts[-1]] = value
    return cfg


# -- geometry construction -----------------------------------------------------


def _build_angles(spec, path):
    if isinstance(spec, list):
        return np.asarray(spec, dtype=np.float64)
    if not isinstance(spec, dict):
        raise ConfigError(f"{path}: expected a list or mapping")
    if "list" in spec:
        return np.asarray(spec["list"], dtype=np.float64)
    if "golden" in spec:
        count = int(spec["golden"])
        if count < 1:
            raise ConfigError(f"{path}.golden: need at least one angle")
        return np.arange(count) * GOLDEN_STEP_DEG
    for key in ("start", "stop", "num"):
        if key not in spec:
            raise ConfigError(f"{path}.{key}: required for a linear ramp")
    return np.linspace(float(spec["start"]), float(spec["stop"]),
                       int(spec["num"]),
                       endpoint=bool(spec.get("endpoint", False)))


def build_acquisition_geometry(spec, path="input.geometry"):
    beam = _check_choice(_require(spec, "beam", path, str),
                         ("parallel2D", "parallel3D", "fan", "cone"),
                         f"{path}.beam")
    num_pixels = _require(spec, "num_pixels", path, (int, list))
    angles = _build_angles(_require(spec, "angles", path), f"{path}.angles")
    kwargs = {
        "pixel_size": _optional(spec, "pixel_size", 1.0),
        "angle_unit": _optional(spec, "angle_unit", "degree"),
    }
    if "origin" in spec:
        kwargs["origin"] = spec["origin"]
    if "rotation_axis_position" in spec:
        kwargs["rotation_axis_position"] = spec["rotation_axis_position"]
    try:
        if beam == "parallel2D":
            return parallel_beam_2d(num_pixels, angles, **kwargs)
        if beam == "parallel3D":
            if "rotation_axis_direction" in spec:
                kwargs["rotation_axis_direction"] = \
                    spec["rotation_axis_direction"]
            return parallel_beam_3d(num_pixels, angles, **kwargs)
        source = _require(spec, "source_position", path, list)
        detector = _require(spec, "detector_position", path, list)
        if beam == "fan":
            return fan_beam_2d(source, detector, num_pixels, angles,
                               **kwargs)
        if "rotation_axis_direction" in spec:
            kwargs["rotation_axis_direction"] = \
                spec["rotation_axis_direction"]
        return cone_beam_3d(source, detector, num_pixels, angles, **kwargs)
    except GeometryError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def build_image_geometry(spec, path="input.image"):
    voxel_num = _require(spec, "voxel_num", path, (int, list))
    try:
        return ImageGeometry(
            voxel_num if isinstance(voxel_num, list) else
            (voxel_num, voxel_num),
            _optional(spec, "voxel_size", 1.0),
            _optional(spec, "center_offset", 0.0))
    except GeometryError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


# -- validation -----------------------------------------------------------------


@dataclass
class PipelinePlan:
    cfg: dict
    acquisition_geometry: AcquisitionGeometry | None
    image_geometry: ImageGeometry | None
    stages: list
    recon: dict | None
    outputs: list
    noise: dict | None
    input_kind: str


def validate_config(cfg):
    """Full validation; returns a plan without touching any data."""
    if not isinstance(cfg, dict):
        raise ConfigError("config: top level must be a mapping")
    for key in cfg:
        if key not in ("input", "stages", "recon", "outputs"):
            raise ConfigError(f"{key}: unknown top-level section")
    inp = _require(cfg, "input", "config")
    kinds = [k for k in ("phantom", "native", "tiff") if k in inp]
    if len(kinds) != 1:
        raise ConfigError("input: exactly one of phantom/native/tiff "
                          "is required")
    input_kind = kinds[0]

    ag = None
    ig = None
    if input_kind == "phantom":
        phantom = inp["phantom"]
        kind = _require(phantom, "kind", "input.phantom", str)
        if kind not in simulation._PHANTOM_BUILDERS:
            raise ConfigError(f"input.phantom.kind: unknown phantom "
                              f"{kind!r}")
        ag = build_acquisition_geometry(
            _require(inp, "geometry", "input"))
    elif input_kind == "tiff":
        tiff = inp["tiff"]
        _require(tiff, "pattern", "input.tiff", str)
        labels = _require(tiff, "labels", "input.tiff", list)
        if len(labels) != 3:
            raise ConfigError("input.tiff.labels: need exactly three "
                              "labels")
        if "geometry" in inp:
            ag = build_acquisition_geometry(inp["geometry"])
    else:
        _require(inp, "native", "input", str)
        if "geometry" in inp:
            ag = build_acquisition_geometry(inp["geometry"])
    if "image" in inp:
        ig = build_image_geometry(inp["image"])

    noise = None
    if "noise" in inp and inp["noise"] is not None:
        noise = dict(inp["noise"])
        model = _require(noise, "model", "input.noise", str)
        if model != "none":
            _check_choice(model, ("gaussian", "poisson"),
                          "input.noise.model")
            if model == "gaussian" and "sigma" not in noise:
                raise ConfigError("input.noise.sigma: required for "
                                  "gaussian noise")
            if model == "poisson" and "incident" not in noise:
                raise ConfigError("input.noise.incident: required for "
                                  "poisson noise")

    stages = []
    for k, stage in enumerate(cfg.get("stages", []) or []):
        path = f"stages[{k}]"
        kind = _require(stage, "kind", path, str)
        _check_choice(kind, STAGE_KINDS, f"{path}.kind")
        if kind == "scale_slice_mean":
            _require(stage, "label", path, str)
            _require(stage, "index", path, int)
        elif kind in ("slice", "bin"):
            roi = _require(stage, "roi", path, dict)
            for label, entry in roi.items():
                if not isinstance(entry, list) or not 2 <= len(entry) <= 3:
                    raise ConfigError(
                        f"{path}.roi.{label}: expected [start, stop] or "
                        "[start, stop, step]")
        elif kind == "pad":
            _require(stage, "widths", path, dict)
        elif kind == "ring_remove":
            width = _optional(stage, "width", 11)
            if width % 2 == 0 or width < 3:
                raise ConfigError(f"{path}.width: must be an odd integer "
                                  ">= 3")
        elif kind == "normalise":
            _require(stage, "flat", path)
        elif kind == "mask":
            _check_choice(_optional(stage, "method", "threshold"),
                          ("threshold", "non_finite"), f"{path}.method")
        stages.append(dict(stage))

    recon = cfg.get("recon")
    if recon is not None:
        method = _require(recon, "method", "recon", str)
        _check_choice(method, SOLVERS, "recon.method")
        if method != "fbp":
            iterations = _require(recon, "iterations", "recon", int)
            if iterations < 0:
                raise ConfigError("recon.iterations: must be >= 0")
        if method == "fbp" and "filter" in recon:
            filt = recon["filter"]
            try:
                FilterSpec(_optional(filt, "kind", "ram-lak"),
                           _optional(filt, "cutoff", 1.0))
            except ValueError as exc:
                raise ConfigError(f"recon.filter: {exc}") from exc
        if method in ("fista",):
            reg = _optional(recon, "regulariser", "none")
            _check_choice(reg, ("none", "box", "l1", "tv"),
                          "recon.regulariser")
        if method in ("pdhg", "ladmm"):
            fidelity = _optional(recon, "fidelity", "ls")
            _check_choice(fidelity, ("ls", "kl"), "recon.fidelity")
            if method == "ladmm" and fidelity == "kl":
                raise ConfigError("recon.fidelity: ladmm supports only "
                                  "'ls'")
        if method == "gd":
            objective = _optional(recon, "objective", "least_squares")
            _check_choice(objective,
                          ("least_squares", "tikhonov", "smooth_tv"),
                          "recon.objective")
        if method == "cgls" and "tikhonov" in recon:
            tik = recon["tikhonov"]
            op = _optional(tik, "operator", "identity")
            _check_choice(op, ("identity", "gradient", "anisotropic"),
                          "recon.tikhonov.operator")
            if op == "anisotropic":
                alphas = _require(tik, "alphas", "recon.tikhonov", dict)
                for label in alphas:
                    if label not in ("vertical", "horizontal_y",
                                     "horizontal_x"):
                        raise ConfigError(
                            f"recon.tikhonov.alphas.{label}: unknown image "
                            "axis")
            else:
                _require(tik, "alpha", "recon.tikhonov", (int, float))

    outputs = []
    for k, out in enumerate(cfg.get("outputs", []) or []):
        path = f"outputs[{k}]"
        kind = _require(out, "kind", path, str)
        _check_choice(kind, OUTPUT_KINDS, f"{path}.kind")
        what = _optional(out, "what", "recon")
        _check_choice(what, ("recon", "data"), f"{path}.what")
        if kind in ("native", "png", "history_csv", "metrics"):
            _require(out, "path", path, str)
        if kind == "tiff":
            _require(out, "dir", path, str)
            _require(out, "axis", path, str)
        if kind == "png":
            vr = _require(out, "value_range", path, list)
            if len(vr) != 2 or not vr[0] < vr[1]:
                raise ConfigError(f"{path}.value_range: expected [lo, hi] "
                                  "with lo < hi")
        if kind == "metrics":
            ref = _require(out, "reference", path, str)
            if ref == "phantom" and input_kind != "phantom":
                raise ConfigError(f"{path}.reference: 'phantom' is only "
                                  "available for phantom inputs")
        if kind == "history_csv" and (recon is None
                                      or recon.get("method") == "fbp"):
            raise ConfigError(f"{path}: objective history needs an "
                              "iterative recon method")
        outputs.append(dict(out))

    return PipelinePlan(cfg=cfg, acquisition_geometry=ag, image_geometry=ig,
                        stages=stages, recon=recon, outputs=outputs,
                        noise=noise, input_kind=input_kind)


# -- execution -------------------------------------------------------------------


@dataclass
class PipelineResult:
    data: LabeledArray | None = None
    recon: LabeledArray | None = None
    reference: LabeledArray | None = None
    metrics: dict | None = None
    algorithm: object | None = None
    artifacts: list = field(default_factory=list)
    timings: list = field(default_factory=list)


def _timed(result, name, fn, quiet):
    t0 = time.perf_counter()
    value = fn()
    dt = time.perf_counter() - t0
    result.timings.append((name, dt))
    if not quiet:
        print(f"  {name:<28s} {dt:8.3f} s")
    return value


def _load_input(plan, seed, result, quiet):
    inp = plan.cfg["input"]
    if plan.input_kind == "phantom":
        ag = plan.acquisition_geometry
        ig = plan.image_geometry or default_image_geometry(ag)
        params = {k: v for k, v in inp["phantom"].items() if k != "kind"}
        phantom = simulation.make_phantom(inp["phantom"]["kind"], ig,
                                          **params)
        result.reference = phantom
        projector = ProjectionOperator(ig, ag)
        data = _timed(result, "forward projection",
                      lambda: projector.direct(phantom), quiet)
        if plan.noise and plan.noise.get("model", "none") != "none":
            noise_seed = plan.noise.get("seed", seed)
            data = simulation.add_noise(
                data, plan.noise["model"], seed=noise_seed,
                sigma=plan.noise.get("sigma"),
                incident=plan.noise.get("incident"))
        return data
    if plan.input_kind == "native":
        data = fileio.read_native(inp["native"])
        return data
    tiff = inp["tiff"]
    data = fileio.read_tiff_stack(tiff["pattern"], tiff["labels"])
    if plan.acquisition_geometry is not None:
        data = LabeledArray(data.values, data.labels,
                            plan.acquisition_geometry)
    return data


def _make_stage(stage):
    kind = stage["kind"]
    if kind == "scale_slice_mean":
        label, index = stage["label"], stage["index"]

        def apply(data):
            return data / data.get_slice(**{label: index}).mean()
        return apply
    if kind == "neglog":
        def apply(data):
            return -1.0 * data.log()
        return apply
    if kind == "centre_of_rotation":
        return CentreOfRotationCorrector(
            slice_index=stage.get("slice_index", "centre"),
            angle_tolerance=stage.get("angle_tolerance", 0.1),
            nearest_pair=stage.get("nearest_pair", False))
    if kind == "slice":
        return Slicer(stage["roi"])
    if kind == "bin":
        return Binner(stage["roi"])
    if kind == "pad":
        return Padder(stage["widths"], stage.get("mode", "constant"),
                      stage.get("value", 0.0))
    if kind == "ring_remove":
        return RingRemover(stage.get("width", 11))
    if kind == "normalise":
        return Normaliser(stage["flat"], stage.get("dark", 0.0),
                          stage.get("fill", 1.0))
    if kind == "mask":
        generator = MaskGenerator(stage.get("method", "threshold"),
                                  stage.get("lower"), stage.get("upper"))

        def apply(data):
            mask = generator(data)
            return Masker(mask, "value", stage.get("value", 0.0))(data)
        return apply
    raise ConfigError(f"stages: unknown stage kind {kind!r}")


def _tikhonov_operator(recon, projector, ig):
    tik = recon.get("tikhonov")
    if tik is None:
        return projector, None
    kind = tik.get("operator", "identity")
    if kind == "identity":
        reg = float(tik["alpha"]) * IdentityOperator(ig)
        ops = [projector, reg]
    elif kind == "gradient":
        reg = float(tik["alpha"]) * GradientOperator(ig)
        ops = [projector, reg]
    else:
        ops = [projector]
        for label, alpha in sorted(tik["alphas"].items()):
            if label not in ig.labels:
                raise PipelineRuntimeError(
                    f"tikhonov axis {label!r} not present in the image")
            ops.append(float(alpha)
                       * FiniteDifferenceOperator(ig, label))
    block = BlockOperator(*ops)
    return block, len(ops)


def _zero_like(geometry):
    if isinstance(geometry, ImageGeometry) or \
            isinstance(geometry, AcquisitionGeometry):
        return geometry.allocate(0.0)
    return geometry.allocate(0.0)


def _run_recon(plan, data, result, quiet):
    recon = plan.recon
    method = recon["method"]
    ag = data.geometry
    if ag is None or not isinstance(ag, AcquisitionGeometry):
        raise PipelineRuntimeError("reconstruction needs acquisition data "
                                   "with geometry (did a stage drop it?)")
    ig = plan.image_geometry or default_image_geometry(ag)

    if method == "fbp":
        filt = recon.get("filter", {})
        spec = FilterSpec(filt.get("kind", "ram-lak"),
                          filt.get("cutoff", 1.0))
        return _timed(result, "fbp",
                      lambda: fbp_parallel(data, ig, spec), quiet), None

    projector = ProjectionOperator(ig, ag)
    iterations = int(recon["iterations"])
    x0 = ig.allocate(0.0)
    log_interval = recon.get("log_interval")

    if method == "cgls":
        operator, n_blocks = _tikhonov_operator(recon, projector, ig)
        if n_blocks is None:
            rhs = data
        else:
            blocks = [data]
            for i in range(1, n_blocks):
                blocks.append(_zero_like(operator.grid[i][0].range))
            rhs = BlockContainer(blocks)
        alg = CGLS(x0, operator, rhs, tolerance=recon.get("tolerance"),
                   max_iteration=iterations, log_interval=log_interval)
    elif method == "sirt":
        bounds = recon.get("bounds", [None, None])
        alg = SIRT(x0, projector, data, lower=bounds[0], upper=bounds[1],
                   relaxation=recon.get("relaxation", 1.0),
                   max_iteration=iterations, log_interval=log_interval)
    elif method == "gd":
        objective_kind = recon.get("objective", "least_squares")
        f = LeastSquares(projector, data)
        if objective_kind == "tikhonov":
            alpha = float(recon.get("alpha", 1.0))
            f = f + (alpha ** 2) * OperatorCompositionFunction(
                L2NormSquared(), GradientOperator(ig))
        elif objective_kind == "smooth_tv":
            alpha = float(recon.get("alpha", 1.0))
            beta = float(recon.get("beta", 0.01))
            f = f + alpha * OperatorCompositionFunction(
                SmoothMixedL21Norm(beta), GradientOperator(ig))
        alg = GD(x0, f, step=recon.get("step"),
                 max_iteration=iterations, log_interval=log_interval)
    elif method == "fista":
        f = LeastSquares(projector, data)
        reg = recon.get("regulariser", "none")
        if reg == "none":
            g = ZeroFunction()
        elif reg == "box":
            bounds = recon.get("bounds", [0.0, None])
            g = IndicatorBox(bounds[0], bounds[1])
        elif reg == "l1":
            g = float(recon.get("alpha", 1.0)) * L1Norm()
        else:
            bounds = recon.get("bounds", [None, None])
            g = float(recon.get("alpha", 1.0)) * TotalVariation(
                inner_iterations=recon.get("inner_iterations", 100),
                lower=bounds[0], upper=bounds[1])
        alg = FISTA(x0, f, g, max_iteration=iterations,
                    log_interval=log_interval)
    elif method in ("pdhg", "ladmm"):
        alpha = float(recon.get("alpha", 1.0))
        grad = GradientOperator(ig)
        K = BlockOperator(projector, grad)
        if recon.get("fidelity", "ls") == "kl":
            eta = data.clone()
            eta.fill(float(recon.get("eta", 1e-6)))
            fid = KullbackLeibler(data, eta)
        else:
            fid = L2NormSquared(b=data)
        F = BlockFunction(fid, alpha * MixedL21Norm())
        g = IndicatorBox(lower=0.0) if recon.get("nonneg", False) \
            else ZeroFunction()
        cls = PDHG if method == "pdhg" else LADMM
        alg = cls(F, K, g, sigma=recon.get("sigma"), tau=recon.get("tau"),
                  max_iteration=iterations, log_interval=log_interval)
    else:  # pragma: no cover - validation rejects unknown methods
        raise PipelineRuntimeError(f"unhandled method {method}")

    _timed(result, f"{method} x{iterations}",
           lambda: alg.run(iterations), quiet)
    return alg.solution, alg


def _write_outputs(plan, result, quiet):
    for out in plan.outputs:
        kind = out["kind"]
        what = out.get("what", "recon")
        target = result.recon if what == "recon" else result.data
        if kind in ("native", "tiff", "png") and target is None:
            raise PipelineRuntimeError(f"output {kind}: no {what} was "
                                       "produced")
        if kind == "native":
            result.artifacts.append(fileio.write_native(target,
                                                        out["path"]))
        elif kind == "tiff":
            result.artifacts.extend(fileio.write_tiff_stack(
                target, out["dir"], out["axis"],
                out.get("prefix", "slice")))
        elif kind == "png":
            frame = target
            if "slice" in out:
                sl = out["slice"]
                frame = target.get_slice(**{sl["label"]: sl["index"]})
            if frame.ndim != 2:
                raise PipelineRuntimeError(
                    "output png: data is not 2-D; add a slice selector")
            result.artifacts.append(fileio.export_png_heatmap(
                frame, out["path"], tuple(out["value_range"]),
                out.get("colormap", "gray")))
        elif kind == "history_csv":
            if result.algorithm is None:
                raise PipelineRuntimeError("output history_csv: no "
                                           "iterative solver was run")
            write_history_csv(result.algorithm, out["path"])
            result.artifacts.append(out["path"])
        elif kind == "metrics":
            if out["reference"] == "phantom":
                ref = result.reference
            else:
                ref = fileio.read_native(out["reference"])
            x = result.recon if what == "recon" else result.data
            if x is None or ref is None:
                raise PipelineRuntimeError("output metrics: missing data "
                                           "or reference")
            m = {"mse": simulation.mse(x, ref),
                 "psnr": simulation.psnr(x, ref)}
            result.metrics = m
            import json
            with open(out["path"], "w") as fh:
                json.dump({k: (None if math.isinf(v) else v)
                           for k, v in m.items()}, fh, sort_keys=True)
            result.artifacts.append(out["path"])
            if not quiet:
                print(f"  metrics: mse={m['mse']:.6e} "
                      f"psnr={m['psnr']:.2f} dB")


def run_pipeline(config, overrides=(), threads=None, seed=None,
                 quiet=False):
    """Validate and execute a pipeline; returns a :class:`PipelineResult`.

    ``overrides`` are dotted-path key=value strings applied before
    validation.  ``seed`` feeds noise simulation when the config does not
    pin one.  ``threads`` is accepted for interface compatibility; all
    computations are deterministic and independent of it.
    """
    del threads  # results are thread-count independent by construction
    cfg = load_config(config)
    cfg = apply_overrides(cfg, overrides)
    plan = validate_config(cfg)
    result = PipelineResult()
    data = _load_input(plan, seed, result, quiet)

    for k, stage in enumerate(plan.stages):
        apply = _make_stage(stage)
        name = f"stage[{k}] {stage['kind']}"
        data = _timed(result, name, lambda a=apply, d=data: a(d), quiet)
    result.data = data

    if plan.recon is not None:
        result.recon, result.algorithm = _run_recon(plan, data, result,
                                                    quiet)
    _write_outputs(plan, result, quiet)
    return result


def describe_geometry(config):
    """Deterministic text report of the configured acquisition geometry."""
    cfg = load_config(config)
    inp = _require(cfg, "input", "config")
    if "geometry" in inp:
        ag = build_acquisition_geometry(inp["geometry"])
    elif "native" in inp:
        data = fileio.read_native(inp["native"])
        ag = data.geometry
        if not isinstance(ag, AcquisitionGeometry):
            raise ConfigError("input.native: file carries no acquisition "
                              "geometry")
    else:
        raise ConfigError("input.geometry: required to describe a geometry")

    def vec(v):
        return "[" + ", ".join(f"{x:.6g}" for x in v) + "]"

    lines = [
        f"beam type:                {ag.beam}",
        f"source position:          "
        + (vec(ag.source_position) if ag.beam in ("fan", "cone")
           else "(parallel beam)"),
        f"detector position:        {vec(ag.detector_position)}",
        f"detector direction x:     {vec(ag.detector_direction_x)}",
        f"detector direction y:     {vec(ag.detector_direction_y)}",
        f"rotation axis position:   {vec(ag.rotation_axis_position)}",
        f"rotation axis direction:  {vec(ag.rotation_axis_direction)}",
        f"panel pixels:             {ag.num_pixels[0]} x "
        f"{ag.num_pixels[1]}",
        f"pixel size:               {ag.pixel_size[0]:.6g} x "
        f"{ag.pixel_size[1]:.6g}",
        f"panel origin:             {ag.origin}",
        f"angles:                   {ag.angles.size} in "
        f"[{ag.angles.min():.6g}, {ag.angles.max():.6g}] {ag.angle_unit}",
        f"data shape:               {ag.shape}",
        f"data labels:              {ag.labels}",
    ]
    return "\n".join(lines) + "\n"


def draw_geometry_schematic(config, path):
    """Minimal top-view PNG schematic of the acquisition layout."""
    from PIL import Image, ImageDraw

    cfg = load_config(config)
    ag = build_acquisition_geometry(_require(cfg["input"], "geometry",
                                             "input"))
    size = 480
    img = Image.new("RGB", (size, size), (255, 255, 255))
    draw = ImageDraw.Draw(img)
    pts = [ag.detector_position, ag.rotation_axis_position]
    if ag.beam in ("fan", "cone"):
        pts.append(ag.source_position)
    half_panel = ag.num_pixels[0] * ag.pixel_size[0] / 2.0
    extent = max(max(abs(p[0]) + half_panel, abs(p[1])) for p in pts)
    extent = max(extent, half_panel) * 1.2 + 1e-9

    def to_px(p):
        return (size / 2 + p[0] / extent * size / 2,
                size / 2 - p[1] / extent * size / 2)

    d0 = ag.detector_position - half_panel * ag.detector_direction_x
    d1 = ag.detector_position + half_panel * ag.detector_direction_x
    draw.line([to_px(d0), to_px(d1)], fill=(0, 0, 200), width=3)
    ax, ay = to_px(ag.rotation_axis_position)
    draw.line([(ax - 6, ay), (ax + 6, ay)], fill=(200, 0, 0), width=2)
    draw.line([(ax, ay - 6), (ax, ay + 6)], fill=(200, 0, 0), width=2)
    if ag.beam in ("fan", "cone"):
        sx, sy = to_px(ag.source_position)
        draw.ellipse([sx - 4, sy - 4, sx + 4, sy + 4], fill=(0, 150, 0))
        draw.line([to_px(ag.source_position), to_px(d0)],
                  fill=(180, 180, 180), width=1)
        draw.line([to_px(ag.source_position), to_px(d1)],
                  fill=(180, 180, 180), width=1)
    img.save(path, format="PNG")
    return path
