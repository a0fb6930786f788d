"""Command-line entry point: ``tkpan <command> ...``.

Exit codes: 0 success, 1 check failure, 2 I/O, format or usage error,
3 shape or precondition violation. Commands write all of their outputs or
none of them.
"""

import argparse
import os
import sys

import numpy as np

from . import io
from .geometry import BaselineTable, max_disparity, primitive_disparity, primitive_occlusion
from .geometry import scale_pan, spp_blend
from .gradcheck import gradcheck
from .metrics import depth_metrics, format_report, image_metrics
from .parallel import set_num_threads
from .srstack import DEFAULT_LEVELS, build_stack
from .tkernel import PanSpec, blend_forward
from .toytrain import KINDS, eval_toy, make_scene, train_toy

EXIT_OK, EXIT_CHECK, EXIT_IO, EXIT_SHAPE = 0, 1, 2, 3


class CheckFailed(Exception):
    pass


def _pan(text):
    v = float(text)
    if not np.isfinite(v) or v == 0.0:
        raise argparse.ArgumentTypeError(f"pan must be finite and nonzero, got {text}")
    return v


def _at_least(lo):
    def parse(text):
        v = int(text)
        if v < lo:
            raise argparse.ArgumentTypeError(f"must be >= {lo}, got {v}")
        return v
    return parse


def _nonneg_float(text):
    v = float(text)
    if not np.isfinite(v) or v < 0:
        raise argparse.ArgumentTypeError(f"must be a finite value >= 0, got {text}")
    return v


def _spec(args):
    return PanSpec(args.pan, n_long=args.n_long, n_short=args.n_short, n_up=args.n_up,
                   n_down=args.n_down, n_dilations=args.n_dilations,
                   dilation_rule=args.dilation_rule)


def _add_layout(p):
    p.add_argument("--n-long", type=_at_least(1), default=32)
    p.add_argument("--n-short", type=_at_least(1), default=16)
    p.add_argument("--n-up", type=_at_least(1), default=16)
    p.add_argument("--n-down", type=_at_least(1), default=16)
    p.add_argument("--n-dilations", type=_at_least(1), default=3)
    p.add_argument("--dilation-rule", choices=("long", "literal"), default="long")


def cmd_pan(args):
    spec = _spec(args)
    img = io.read_field(args.input)
    kernels = io.read_mnrt(args.params)
    weights = io.read_mnrt(args.weights)
    out = blend_forward(img, kernels, weights, spec)
    io.write_bytes_atomic({args.output: io.encode_png(out)})


def cmd_extract(args):
    spec = _spec(args)
    kernels = io.read_mnrt(args.params)
    disp = primitive_disparity(kernels, spec)
    occ = primitive_occlusion(kernels, spec)
    p = args.prefix
    io.write_bytes_atomic({
        p + "_disp.mnrt": io.encode_mnrt(disp),
        p + "_disp.png": io.encode_png(disp),
        p + "_occ.mnrt": io.encode_mnrt(occ),
        p + "_occ.png": io.encode_png(occ),
    })


def cmd_gradcheck(args):
    spec = _spec(args)
    probes = None if args.probes == 0 else args.probes
    rep = gradcheck(args.seed, args.h, args.w, spec, probes=probes)
    print(format_report([(f"max_rel_{k}", v) for k, v in rep.items()]))
    if not all(v < args.tol for v in rep.values()):
        raise CheckFailed(f"relative error above tolerance {args.tol}")


def cmd_train_toy(args):
    spec = _spec(args)
    scene = make_scene(args.kind, args.height, args.width, args.disparities, seed=args.seed,
                       pan_amount=args.pan)
    state, _ = train_toy(scene, spec, args.iters, step_size=args.step_size, seed=args.seed,
                         adam=args.adam, smooth=args.smooth)
    ev = eval_toy(state, scene, spec)
    csv = "iter,loss\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(state.loss_history))
    d = args.out
    os.makedirs(d, exist_ok=True)
    io.write_bytes_atomic({
        os.path.join(d, "loss.csv"): csv.encode("ascii"),
        os.path.join(d, "kernels.mnrt"): io.encode_mnrt(state.kernels),
        os.path.join(d, "weights.mnrt"): io.encode_mnrt(state.weights),
        os.path.join(d, "recon.png"): io.encode_png(ev["recon"]),
        os.path.join(d, "disp.png"): io.encode_png(ev["disparity"]),
    })
    h = state.loss_history
    pairs = [("loss0", h[0]), ("loss", h[-1]), ("ratio", h[-1] / h[0]),
             ("psnr", ev["psnr"]), ("disp_mae", ev["disp_mae"])]
    if ev["depth"] is not None:
        pairs.append(("a1", ev["depth"].a1))
    print(format_report(pairs))


def cmd_stack(args):
    img = io.read_field(args.input)
    if args.params is not None:
        spec = _spec(args)
        max_disp = max_disparity(io.read_mnrt(args.params), spec)
    else:
        max_disp = args.max_disp
    st = build_stack(img, args.pan, max_disp, args.levels)
    io.write_bytes_atomic({args.output: io.encode_stack(st.levels, st.pan_amount, st.max_disp)})


def cmd_metrics(args):
    pred = io.read_field(args.pred)
    gt = io.read_field(args.gt)
    rmse, psnr, s = image_metrics(pred * 255.0, gt * 255.0)
    print(format_report([("rmse", rmse), ("psnr", psnr), ("ssim", s)]))


def cmd_depth_metrics(args):
    pred = io.read_field(args.pred)
    gt = io.read_field(args.gt)
    mask = None if args.mask is None else io.read_field(args.mask) > 0
    dm = depth_metrics(pred, gt, mask)
    print(format_report(dm.as_dict().items()))


def cmd_spp(args):
    fields = [io.read_mnrt(p) for p in (args.disp_fwd, args.disp_bwd, args.amb_fwd, args.amb_bwd)]
    out = spp_blend(*fields)
    outputs = {args.output: io.encode_mnrt(out)}
    if args.png:
        outputs[args.png] = io.encode_png(out)
    io.write_bytes_atomic(outputs)


def cmd_scale_pan(args):
    table = BaselineTable.parse(args.baselines, args.ref)
    print(f"{scale_pan(table, args.dataset, args.pan):.6f}")


def build_parser():
    ap = argparse.ArgumentParser(prog="tkpan", description=__doc__.splitlines()[0])
    ap.add_argument("--threads", type=_at_least(1), default=None,
                    help="worker threads (default: $TKPAN_THREADS or CPU count)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pan", help="synthesize a panned view from kernel and blend fields")
    p.add_argument("input")
    p.add_argument("params", help="kernel field, MNRT")
    p.add_argument("weights", help="blend weights, MNRT")
    p.add_argument("--pan", type=_pan, required=True)
    p.add_argument("-o", "--output", required=True)
    _add_layout(p)
    p.set_defaults(fn=cmd_pan)

    p = sub.add_parser("extract", help="primitive disparity and occlusion maps")
    p.add_argument("params")
    p.add_argument("--pan", type=_pan, default=153.0)
    p.add_argument("-o", "--prefix", required=True)
    _add_layout(p)
    p.set_defaults(fn=cmd_extract)

    p = sub.add_parser("gradcheck", help="finite-difference check of the blend gradients")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--h", type=_at_least(4), default=6)
    p.add_argument("--w", type=_at_least(4), default=9)
    p.add_argument("--tol", type=_nonneg_float, default=1e-4)
    p.add_argument("--pan", type=_pan, default=153.0)
    p.add_argument("--probes", type=_at_least(0), default=40,
                   help="entries checked per group (0 = all)")
    _add_layout(p)
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("train-toy", help="fit kernel logits on a synthetic layered scene")
    p.add_argument("--kind", choices=KINDS, default="noise")
    p.add_argument("--height", type=_at_least(2), default=64)
    p.add_argument("--width", type=_at_least(2), default=96)
    p.add_argument("--disparities", type=lambda s: [float(v) for v in s.split(",")],
                   default=[19.125], help="comma-separated, front to back (pixels)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iters", type=_at_least(0), default=500)
    p.add_argument("--step-size", type=float, default=None)
    p.add_argument("--smooth", type=_nonneg_float, default=2.0)
    p.add_argument("--adam", action="store_true")
    p.add_argument("--pan", type=_pan, default=153.0)
    p.add_argument("--out", required=True, help="output directory")
    _add_layout(p)
    p.set_defaults(fn=cmd_train_toy)

    p = sub.add_parser("stack", help="build the shifted-downscaled center-view stack")
    p.add_argument("input")
    p.add_argument("--pan", type=_pan, required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--max-disp", type=_nonneg_float)
    g.add_argument("--params", help="kernel field; max disparity taken from it")
    p.add_argument("--levels", type=_at_least(1), default=DEFAULT_LEVELS)
    p.add_argument("-o", "--output", required=True)
    _add_layout(p)
    p.set_defaults(fn=cmd_stack)

    p = sub.add_parser("metrics", help="RMSE / PSNR / SSIM on a 0-255 scale")
    p.add_argument("pred")
    p.add_argument("gt")
    p.set_defaults(fn=cmd_metrics)

    p = sub.add_parser("depth-metrics", help="abs_rel, sq_rel, rms, log_rms, a1-a3")
    p.add_argument("pred")
    p.add_argument("gt")
    p.add_argument("--mask")
    p.set_defaults(fn=cmd_depth_metrics)

    p = sub.add_parser("spp", help="ambiguity-softmax blend of two disparity maps")
    p.add_argument("disp_fwd")
    p.add_argument("disp_bwd")
    p.add_argument("amb_fwd")
    p.add_argument("amb_bwd")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--png")
    p.set_defaults(fn=cmd_spp)

    p = sub.add_parser("scale-pan", help="rescale a pan amount by relative baseline")
    p.add_argument("--baselines", required=True, help="e.g. kitti=54,cs=22")
    p.add_argument("--ref", required=True)
    p.add_argument("--pan", type=float, required=True)
    p.add_argument("--dataset", required=True)
    p.set_defaults(fn=cmd_scale_pan)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_IO
    try:
        set_num_threads(args.threads)
        args.fn(args)
    except CheckFailed as exc:
        print(f"tkpan: check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (OSError, io.FormatError) as exc:
        print(f"tkpan: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"tkpan: {exc}", file=sys.stderr)
        return EXIT_SHAPE
    finally:
        set_num_threads(None)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
