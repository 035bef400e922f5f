"""Command-line front end: quantize, analyze, sweep, calibrate, simulate.

Every command reads QTNS/QTNQ files, writes deterministic artifacts under
--out-dir (JSON with sorted keys, '.'-decimal CSV), and reports failures as
a machine-readable JSON object on stderr with a nonzero exit code. Output
files are written to a temp name and renamed, so readers never observe a
half-written artifact.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import backend
from .bias import MEAN_AND_VARIANCE, MEAN_ONLY, measure_bias, apply_correction
from .calibration import DEFAULT_K, calibrate
from .datapath import (
    inner_product_pwlq,
    inner_product_uniform,
    overhead_report,
    reference_inner_product,
    uniform_reference_trace,
)
from .distributions import GAUSSIAN, LAPLACIAN, DistributionModel, fit
from .error_model import (
    bound_ratio,
    expected_pwlq_error_multi,
    expected_uniform_error,
    pwlq_error_derivatives,
)
from .errors import DataError, QkitError, RecipeError
from .pwlq import (
    PER_CHANNEL,
    PER_LAYER,
    PwlqParams,
    dequantize,
    empirical_mse,
    make_pwlq_params,
    quantize_channels,
    quantize_pwlq,
)
from .qformat import load_quantized, save_quantized
from .solver import (
    CLOSED_FORM_GAUSSIAN,
    EMPIRICAL_GRID,
    GRADIENT_DESCENT,
    SolverConfig,
    empirical_grid,
    perturb_breakpoints,
    solve_breakpoint,
    solve_multi,
)
from .tensor import Tensor, channel_views, load_tensor, stats
from .uniform import (
    SYMMETRIC_SIGNED,
    degenerate_params,
    make_params,
    quantize_uniform,
)

SCHEME_UNIFORM = "uniform"
SCHEME_PWLQ = "pwlq"

BIAS_OFF = "off"

_GRAN_FLAGS = {"per-layer": PER_LAYER, "per-channel": PER_CHANNEL}
_METHOD_FLAGS = {
    "gradient-descent": GRADIENT_DESCENT,
    "closed-form-gaussian": CLOSED_FORM_GAUSSIAN,
    "empirical-grid": EMPIRICAL_GRID,
}
_BIAS_FLAGS = {
    "off": BIAS_OFF,
    "mean-only": MEAN_ONLY,
    "mean-and-variance": MEAN_AND_VARIANCE,
}


@dataclass(frozen=True)
class Recipe:
    """Validated quantization settings shared by the pipeline commands."""

    bits: int = 8
    scheme: str = SCHEME_PWLQ
    granularity: str = PER_LAYER
    breakpoint_method: str = GRADIENT_DESCENT
    k: int = 1
    bias_correction: str = BIAS_OFF
    distribution: str = GAUSSIAN
    seed: int = 0

    def validate(self):
        if not 2 <= self.bits <= 8:
            raise RecipeError(f"bits must be in 2..8, got {self.bits}")
        if self.scheme not in (SCHEME_UNIFORM, SCHEME_PWLQ):
            raise RecipeError(f"unknown scheme {self.scheme!r}")
        if self.granularity not in (PER_LAYER, PER_CHANNEL):
            raise RecipeError(f"unknown granularity {self.granularity!r}")
        if self.breakpoint_method not in _METHOD_FLAGS.values():
            raise RecipeError(f"unknown method {self.breakpoint_method!r}")
        if not 1 <= self.k <= 3:
            raise RecipeError(f"k must be in 1..3, got {self.k}")
        if self.bias_correction not in (BIAS_OFF, MEAN_ONLY, MEAN_AND_VARIANCE):
            raise RecipeError(f"unknown bias correction {self.bias_correction!r}")
        if self.distribution not in (GAUSSIAN, LAPLACIAN):
            raise RecipeError(f"unknown distribution {self.distribution!r}")
        if self.k > 1 and self.breakpoint_method == CLOSED_FORM_GAUSSIAN:
            raise RecipeError("the closed form places a single breakpoint")
        return self

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(d) - known
        if extra:
            raise RecipeError(f"unknown recipe fields {sorted(extra)}")
        return cls(**d).validate()


def _write_atomic(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    if isinstance(data, bytes):
        with open(tmp, "wb") as fh:
            fh.write(data)
    else:
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(data)
    os.replace(tmp, path)
    return path


def _write_json(path, obj):
    return _write_atomic(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _save_quantized_atomic(q, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    save_quantized(q, tmp)
    os.replace(tmp, path)
    return path


def _recipe_from_args(args):
    return Recipe(
        bits=8 if args.bits is None else args.bits,
        scheme=args.scheme or SCHEME_PWLQ,
        granularity=_GRAN_FLAGS[args.granularity],
        breakpoint_method=_METHOD_FLAGS[args.breakpoint_method],
        k=args.k,
        bias_correction=_BIAS_FLAGS[args.bias_correction],
        distribution=args.distribution,
        seed=args.seed,
    ).validate()


def _solve_unit(ch, recipe):
    """Pick params for one quantization unit (whole layer or one channel).

    Returns (params, info dict). Degenerate data falls back to uniform
    params: an all-zero unit has nothing to place a breakpoint in, and a
    constant unit gives the distribution fit no spread to work with.
    """
    st = stats(ch)
    m = st.absmax
    info = {"m": m, "count": st.count}
    if m == 0.0:
        info["scheme"] = SCHEME_UNIFORM
        info["note"] = "all-zero unit"
        return degenerate_params(recipe.bits), info
    if recipe.scheme == SCHEME_UNIFORM:
        info["scheme"] = SCHEME_UNIFORM
        return make_params(recipe.bits, -m, m, SYMMETRIC_SIGNED), info
    if recipe.breakpoint_method == EMPIRICAL_GRID:
        sol = empirical_grid(ch, recipe.bits, recipe.k)
    else:
        try:
            d = fit(ch, recipe.distribution)
        except DataError:
            info["scheme"] = SCHEME_UNIFORM
            info["note"] = "constant unit, no spread to fit"
            return make_params(recipe.bits, -m, m, SYMMETRIC_SIGNED), info
        cfg = SolverConfig(method=recipe.breakpoint_method, k=recipe.k)
        if recipe.k == 1:
            sol = solve_breakpoint(d, recipe.bits, m, cfg)
        else:
            sol = solve_multi(d, recipe.bits, m, recipe.k, cfg)
        info["distribution"] = d.kind
        info["fitted_scale"] = d.scale
    info["scheme"] = SCHEME_PWLQ
    info["breakpoints"] = list(sol.breakpoints)
    info["method"] = sol.method
    info["iterations"] = sol.iterations
    if sol.residual is not None:
        info["residual"] = sol.residual
    if sol.expected_error is not None:
        info["expected_error"] = sol.expected_error
    return make_pwlq_params(recipe.bits, m, sol.breakpoints, recipe.granularity), info


def cmd_quantize(args):
    recipe = _recipe_from_args(args)
    t = load_tensor(args.input)
    if recipe.granularity == PER_CHANNEL:
        units = channel_views(t)
    else:
        units = [t]
    solved = [_solve_unit(ch, recipe) for ch in units]
    params_list = [p for p, _ in solved]
    infos = [info for _, info in solved]
    if recipe.granularity == PER_CHANNEL:
        q = quantize_channels(t, params_list)
    elif isinstance(params_list[0], PwlqParams):
        q = quantize_pwlq(t, params_list[0])
    else:
        q = quantize_uniform(t, params_list[0])
    if recipe.bias_correction != BIAS_OFF:
        dec = dequantize(q)
        if recipe.granularity == PER_CHANNEL:
            origs, decs = units, channel_views(dec)
        else:
            origs = [Tensor(t.flat().reshape(1, -1), _validated=True)]
            decs = [Tensor(dec.flat().reshape(1, -1), _validated=True)]
        new_params = []
        for ch_o, ch_d, p, info in zip(origs, decs, params_list, infos):
            if recipe.granularity == PER_CHANNEL:
                o2 = Tensor(ch_o.flat().reshape(1, -1), _validated=True)
                d2 = Tensor(ch_d.flat().reshape(1, -1), _validated=True)
            else:
                o2, d2 = ch_o, ch_d
            bc = measure_bias(o2, d2, axis=0, mode=recipe.bias_correction)[0]
            info["bias"] = {
                "mean_error": bc.mean_error,
                "scale_ratio": bc.scale_ratio,
                "mode": bc.mode,
            }
            new_params.append(apply_correction(p, bc))
        params_list = new_params
        q = dataclasses.replace(
            q,
            params=tuple(params_list)
            if recipe.granularity == PER_CHANNEL
            else params_list[0],
        )
    out_dir = Path(args.out_dir)
    stem = Path(args.input).stem
    qpath = _save_quantized_atomic(q, out_dir / f"{stem}.qtnq")
    sidecar = {
        "version": 1,
        "recipe": recipe.to_dict(),
        "input": {
            "path": str(args.input),
            "shape": list(t.shape),
            "channel_axis": t.channel_axis,
        },
        "units": infos,
    }
    spath = _write_json(out_dir / f"{stem}.recipe.json", sidecar)
    print(
        json.dumps(
            {"version": 1, "outputs": [str(qpath), str(spath)]}, sort_keys=True
        )
    )
    return 0


def _channel_mses(t, dec, axis):
    out = []
    for ch_o, ch_d in zip(channel_views(t, axis), channel_views(dec, axis)):
        d = ch_d.data.astype(np.float64).reshape(-1) - ch_o.data.astype(
            np.float64
        ).reshape(-1)
        out.append(float(d @ d) / d.size)
    return out


def cmd_analyze(args):
    t = load_tensor(args.original)
    q = load_quantized(args.quantized)
    if tuple(t.shape) != tuple(q.shape):
        raise DataError(f"shape mismatch: {t.shape} vs {q.shape}")
    dec = dequantize(q)
    diff = dec.data.astype(np.float64).reshape(-1) - t.data.astype(
        np.float64
    ).reshape(-1)
    overall = float(diff @ diff) / diff.size
    params_list = list(q.params) if q.per_channel else [q.params]
    file_bits = params_list[0].bits
    bits = args.bits if args.bits is not None else file_bits
    channels = []
    ch_mses = _channel_mses(t, dec, q.channel_axis)
    for i, mse in enumerate(ch_mses):
        entry = {"channel": i, "mse": mse}
        if q.per_channel:
            p = params_list[i]
            if isinstance(p, PwlqParams):
                entry["m"] = p.m
                entry["breakpoints"] = list(p.breakpoints)
            else:
                entry["range"] = [p.range_low, p.range_high]
        channels.append(entry)
    flat = t.flat()
    m = float(np.abs(flat).max())
    report = {
        "version": 1,
        "original": str(args.original),
        "quantized": str(args.quantized),
        "shape": list(t.shape),
        "bits": file_bits,
        "sweep_bits": bits,
        "scheme": SCHEME_PWLQ
        if any(isinstance(p, PwlqParams) for p in params_list)
        else SCHEME_UNIFORM,
        "granularity": PER_CHANNEL if q.per_channel else PER_LAYER,
        "mse": overall,
        "channels": channels,
    }
    out_dir = Path(args.out_dir)
    outputs = []
    if m > 0:
        d = fit(t, args.distribution)
        uni = backend.mse_uniform(
            flat,
            -m,
            m,
            2.0 * m / ((1 << bits) - 1),
            0.0,
            -(1 << (bits - 1)),
            (1 << (bits - 1)) - 1,
        )
        ps = m * np.arange(1, 101) / 101.0
        curve = backend.mse_curve_pwlq(
            np.ascontiguousarray(np.sort(np.abs(flat))),
            m,
            (1 << (bits - 1)) - 1,
            ps,
        )
        lines = ["index,p,mse_pwlq,mse_uniform"]
        for i, (p_i, e_i) in enumerate(zip(ps, curve)):
            lines.append(f"{i},{float(p_i)!r},{float(e_i)!r},{float(uni)!r}")
        cpath = _write_atomic(out_dir / f"sweep_b{bits}.csv", "\n".join(lines) + "\n")
        outputs.append(str(cpath))
        best = int(np.argmin(curve))
        report["layer"] = {
            "m": m,
            "distribution": d.kind,
            "fitted_scale": d.scale,
            "uniform_mse": float(uni),
            "sweep_min_p": float(ps[best]),
            "sweep_min_mse": float(curve[best]),
            "bound_ratio": bound_ratio(bits),
            "uniform_expected_error": expected_uniform_error(bits, -m, m),
        }
        lead = params_list[0]
        if isinstance(lead, PwlqParams) and len(lead.breakpoints) == 1:
            p0 = lead.breakpoints[0]
            dm = DistributionModel(d.kind, d.scale, lead.m)
            entry = {
                "breakpoint": p0,
                "expected_error": expected_pwlq_error_multi(
                    dm, lead.bits, lead.m, lead.breakpoints
                ),
            }
            if 0 < p0 < lead.m / 2:
                first, second = pwlq_error_derivatives(dm, lead.bits, lead.m, p0)
                entry["first_derivative"] = first
                entry["second_derivative"] = second
            report["layer"]["analytic"] = entry
    rpath = _write_json(out_dir / "report.json", report)
    outputs.append(str(rpath))
    print(json.dumps({"version": 1, "outputs": outputs}, sort_keys=True))
    return 0


def cmd_sweep(args):
    recipe = _recipe_from_args(args)
    t = load_tensor(args.input)
    flat = t.flat()
    m = float(np.abs(flat).max())
    if m == 0.0:
        raise DataError("all-zero tensor has no breakpoint to sweep")
    levels = []
    for tok in args.levels.split(","):
        tok = tok.strip()
        if tok:
            lv = float(tok)
            if not 0.0 <= lv <= 50.0:
                raise RecipeError(f"perturbation level {lv} outside 0..50 percent")
            levels.append(lv)
    if not levels:
        raise RecipeError("no perturbation levels given")
    if args.trials < 1:
        raise RecipeError("trials must be >= 1")
    if recipe.breakpoint_method == EMPIRICAL_GRID:
        sol = empirical_grid(t, recipe.bits, recipe.k)
        d = None
    else:
        d = fit(t, recipe.distribution)
        cfg = SolverConfig(method=recipe.breakpoint_method, k=recipe.k)
        if recipe.k == 1:
            sol = solve_breakpoint(d, recipe.bits, m, cfg)
        else:
            sol = solve_multi(d, recipe.bits, m, recipe.k, cfg)
    a_sorted = np.ascontiguousarray(np.sort(np.abs(flat)))
    mag_max = (1 << (recipe.bits - 1)) - 1

    def emp_mse(bps):
        if len(bps) == 1:
            return float(
                backend.mse_curve_pwlq(a_sorted, m, mag_max, np.array(bps))[0]
            )
        return empirical_mse(t, make_pwlq_params(recipe.bits, m, bps))

    base_mse = emp_mse(sol.breakpoints)
    rng = np.random.default_rng(recipe.seed)
    out_levels = []
    for lv in levels:
        mses = []
        for _ in range(args.trials):
            trial_seed = int(rng.integers(0, 2**63 - 1))
            psol = perturb_breakpoints(sol, lv / 100.0, trial_seed)
            mses.append(emp_mse(psol.breakpoints))
        mses = np.array(mses)
        out_levels.append(
            {
                "fraction": lv / 100.0,
                "median": float(np.median(mses)),
                "q25": float(np.percentile(mses, 25)),
                "q75": float(np.percentile(mses, 75)),
                "min": float(np.min(mses)),
                "max": float(np.max(mses)),
            }
        )
    payload = {
        "version": 1,
        "input": str(args.input),
        "bits": recipe.bits,
        "m": m,
        "method": sol.method,
        "breakpoints": list(sol.breakpoints),
        "base_mse": base_mse,
        "expected_error": sol.expected_error,
        "trials": args.trials,
        "levels": out_levels,
    }
    if d is not None:
        payload["distribution"] = d.kind
        payload["fitted_scale"] = d.scale
    path = _write_json(Path(args.out_dir) / "sweep_report.json", payload)
    print(json.dumps({"version": 1, "outputs": [str(path)]}, sort_keys=True))
    return 0


def cmd_calibrate(args):
    root = Path(args.samples_dir)
    if not root.is_dir():
        raise RecipeError(f"{root} is not a directory")
    groups = {}
    for f in sorted(root.glob("*.qtns")):
        layer = f.stem.split("__")[0]
        groups.setdefault(layer, []).append(f)
    if not groups:
        raise RecipeError(f"no .qtns sample files under {root}")
    layers = {}
    for layer, files in sorted(groups.items()):
        tensors = [load_tensor(f) for f in files]
        cr = calibrate(tensors, k=args.k, per_sample=args.per_sample)
        layers[layer] = {
            "min": cr.min_bound,
            "max": cr.max_bound,
            "k": cr.k,
            "samples": len(files),
            "elements": cr.sample_count,
            "degraded": cr.degraded,
        }
    payload = {
        "version": 1,
        "k": args.k,
        "per_sample": bool(args.per_sample),
        "layers": layers,
    }
    path = _write_json(Path(args.out_dir) / "ranges.json", payload)
    print(json.dumps({"version": 1, "outputs": [str(path)]}, sort_keys=True))
    return 0


def cmd_simulate(args):
    wq = load_quantized(args.weights)
    xq = load_quantized(args.activations)
    if wq.per_channel or xq.per_channel:
        raise DataError("the datapath simulates per-layer quantized inputs")
    if isinstance(wq.params, PwlqParams):
        value, trace = inner_product_pwlq(xq, wq, acc_bits=args.acc_bits)
        over = overhead_report(
            uniform_reference_trace(trace.length, args.acc_bits), trace
        )
    else:
        value, trace = inner_product_uniform(xq, wq, acc_bits=args.acc_bits)
        over = None
    ref = reference_inner_product(xq, wq)
    denom = max(abs(ref), 1e-30)
    payload = {
        "version": 1,
        "weights": str(args.weights),
        "activations": str(args.activations),
        "value": value,
        "reference": ref,
        "abs_error": abs(value - ref),
        "rel_error": abs(value - ref) / denom,
        "trace": dataclasses.asdict(trace),
        "overhead": dataclasses.asdict(over) if over is not None else None,
    }
    path = _write_json(Path(args.out_dir) / "simulate_report.json", payload)
    print(json.dumps({"version": 1, "outputs": [str(path)]}, sort_keys=True))
    return 0


def _add_shared(p):
    p.add_argument("--seed", type=int, default=0, help="RNG seed for anything randomized")
    p.add_argument("--bits", type=int, default=None, help="code width (2..8)")
    p.add_argument(
        "--scheme", choices=[SCHEME_UNIFORM, SCHEME_PWLQ], default=SCHEME_PWLQ
    )
    p.add_argument(
        "--granularity",
        choices=sorted(_GRAN_FLAGS),
        default="per-layer",
    )
    p.add_argument(
        "--breakpoint-method",
        choices=sorted(_METHOD_FLAGS),
        default="gradient-descent",
    )
    p.add_argument("--k", type=int, default=1, help="number of breakpoints (1..3)")
    p.add_argument(
        "--bias-correction",
        nargs="?",
        choices=sorted(_BIAS_FLAGS),
        const="mean-and-variance",
        default="off",
    )
    p.add_argument(
        "--distribution", choices=[GAUSSIAN, LAPLACIAN], default=GAUSSIAN
    )
    p.add_argument("--out-dir", default=".", help="directory for artifacts")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qkit",
        description="Piecewise linear post-training quantization toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("quantize", help="quantize a QTNS tensor to QTNQ")
    p.add_argument("input", help="QTNS tensor to quantize")
    _add_shared(p)
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("analyze", help="error report and breakpoint sweep CSV")
    p.add_argument("original", help="QTNS tensor the codes came from")
    p.add_argument("quantized", help="QTNQ file to analyze")
    _add_shared(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="breakpoint sensitivity under perturbation")
    p.add_argument("input", help="QTNS tensor to sweep")
    p.add_argument(
        "--levels", default="5,10,20,30", help="perturbation percentages, comma-separated"
    )
    p.add_argument("--trials", type=int, default=100)
    _add_shared(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("calibrate", help="activation ranges from sample batches")
    p.add_argument("samples_dir", help="directory of <layer>__<batch>.qtns files")
    p.add_argument("--calibration-k", dest="k", type=int, default=DEFAULT_K)
    p.add_argument("--per-sample", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("simulate", help="integer datapath vs float reference")
    p.add_argument("weights", help="QTNQ weights")
    p.add_argument("activations", help="QTNQ activations (uniform)")
    p.add_argument("--acc-bits", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (QkitError, ValueError, TypeError, KeyError, OverflowError,
            ArithmeticError, OSError) as exc:
        sys.stderr.write(
            json.dumps(
                {
                    "version": 1,
                    "error": {"type": type(exc).__name__, "message": str(exc)},
                },
                sort_keys=True,
            )
            + "\n"
        )
        return 2


if __name__ == "__main__":
    sys.exit(main())
