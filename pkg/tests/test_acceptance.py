"""Acceptance criteria, one test per criterion.

Each test prints a ``[PASS]``/``[FAIL]`` line; the lines are repeated in the
terminal summary.
"""

import time

import numpy as np
import pytest

from tkpan.cli import main
from tkpan.geometry import KITTI_CS_VL, primitive_disparity, scale_pan, spp_blend
from tkpan.image import downscale_bilinear_2x
from tkpan.metrics import avg_pool_extractor, depth_metrics, pan_loss
from tkpan.srstack import build_stack
from tkpan.tkernel import PanSpec, blend_forward, dilation_schedule, tconv_forward
from tkpan.toytrain import eval_toy, make_scene, train_toy

import oracles
from test_cli import _run_all

SPEC = PanSpec()


def simplex(rng, shape):
    a = rng.random(shape)
    return a / a.sum(axis=-1, keepdims=True)


def test_1_gradient_correctness(criterion, capsys):
    t0 = time.perf_counter()
    codes = []
    for h, w in ((6, 9), (16, 24)):
        for seed in range(5):
            codes.append(main(["gradcheck", "--seed", str(seed), "--h", str(h), "--w", str(w),
                               "--tol", "1e-4"]))
    out = capsys.readouterr().out
    worst = max(float(tok.split("=")[1]) for tok in out.split() if tok.startswith("max_rel_"))
    dt = time.perf_counter() - t0
    criterion(1, "gradient check, 5 seeds at 6x9 and 16x24, tol 1e-4",
              codes == [0] * 10 and dt < 10.0, f"worst rel err {worst:.2e}, {dt:.2f} s")


def test_2_identity_and_convexity(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    img = rng.random((9, 13, 3))
    delta = np.zeros((9, 13, 81))
    delta[:, :, 0] = 1.0
    identity, blend_dev = True, 0.0
    for p in (153.0, -153.0, 17.25):
        spec = PanSpec(p)
        identity &= all(np.array_equal(tconv_forward(img, delta, d), img) for d in dilation_schedule(spec))
        for i in range(3):
            onehot = np.zeros((9, 13, 3))
            onehot[:, :, i] = 1.0
            identity &= np.array_equal(blend_forward(img, delta, onehot, spec), img)
        # random blend weights sum to one only up to rounding
        blended = blend_forward(img, delta, simplex(rng, (9, 13, 3)), spec)
        blend_dev = max(blend_dev, float(np.max(np.abs(blended - img))))
    bad = 0
    for _ in range(1000):
        h, w = int(rng.integers(1, 7)), int(rng.integers(1, 9))
        pan = float(rng.uniform(1, 300) * rng.choice([-1, 1]))
        x = rng.normal(size=(h, w, 3))
        out = blend_forward(x, simplex(rng, (h, w, 81)), simplex(rng, (h, w, 3)), PanSpec(pan))
        lo, hi = x.min(axis=(0, 1)), x.max(axis=(0, 1))
        bad += int(np.any(out < lo - 1e-12) or np.any(out > hi + 1e-12))
    dt = time.perf_counter() - t0
    criterion(2, "delta identity bit-exact, 1000 convex instances in range",
              identity and blend_dev < 1e-15 and bad == 0 and dt < 5.0,
              f"{bad} violations, random-weight blend dev {blend_dev:.1e}, {dt:.2f} s")


def test_3_exact_shift_round_trip(criterion):
    rng = np.random.default_rng(1)
    cases = [(64.0, i) for i in range(1, 33)] + [(153.0, 32), (-64.0, 7), (32.0, 9)]
    failures = []
    for pan, tap in cases:
        spec = PanSpec(pan)
        shift = tap * spec.global_dilation
        delta = abs(int(shift))
        assert shift == int(shift)
        h, w = 4, delta + 12
        img = rng.random((h, w, 3))
        k = np.zeros((h, w, 81))
        k[:, :, spec.long.start + tap - 1] = 1.0
        out = tconv_forward(img, k, spec.global_dilation)
        if pan > 0:
            same = np.array_equal(out[:, :w - delta], img[:, delta:])
        else:
            same = np.array_equal(out[:, delta:], img[:, :w - delta])
        dp = np.all(primitive_disparity(k, spec) == tap / 32)
        if not (same and dp):
            failures.append((pan, tap))
    criterion(3, "one-hot integer shifts reproduce the shifted image, D_p == i/32",
              not failures, f"{len(cases)} cases, failures {failures}")


def test_4_oracle_equivalence(criterion):
    rng = np.random.default_rng(2)
    n = 100
    err = {"blend_forward": 0.0, "pan_loss": 0.0, "depth_metrics": 0.0, "build_stack": 0.0}
    for _ in range(n):
        h, w = int(rng.integers(1, 4)), int(rng.integers(1, 5))
        pan = float(rng.uniform(1, 200) * rng.choice([-1, 1]))
        img, k, wt = rng.random((h, w, 2)), simplex(rng, (h, w, 81)), simplex(rng, (h, w, 3))
        ref = oracles.blend(img.tolist(), k.tolist(), wt.tolist(), pan)
        err["blend_forward"] = max(err["blend_forward"],
                                   float(np.max(np.abs(blend_forward(img, k, wt, PanSpec(pan)) - ref))))

        gt, out, lr = rng.random((16, 16, 2)), rng.random((16, 16, 2)), rng.random((8, 8, 2))
        got = pan_loss(gt, out, lr, features=avg_pool_extractor).total
        ref = oracles.pan_loss(gt.tolist(), out.tolist(), lr.tolist(), 0.01, with_features=True)
        err["pan_loss"] = max(err["pan_loss"], abs(got - ref))

        g = rng.uniform(0.5, 80, 10)
        p = g * rng.uniform(0.5, 1.8, 10)
        got = list(depth_metrics(p.reshape(2, 5, 1), g.reshape(2, 5, 1)).as_dict().values())
        err["depth_metrics"] = max(err["depth_metrics"], max(abs(a - b) for a, b in
                                                             zip(got, oracles.depth(p.tolist(), g.tolist()))))

        im = rng.random((4, 6, 1))
        md, levels = float(rng.uniform(0, 1)), int(rng.integers(1, 5))
        st = build_stack(im, pan, md, levels)
        ref = oracles.stack(im.tolist(), pan, md, levels)
        err["build_stack"] = max(err["build_stack"],
                                 max(float(np.max(np.abs(a - np.array(b)))) for a, b in zip(st.levels, ref)))
    ok = (err["blend_forward"] < 1e-5 and err["pan_loss"] < 1e-5 and err["build_stack"] < 1e-5
          and err["depth_metrics"] < 1e-9)
    detail = ", ".join(f"{k} {v:.1e}" for k, v in err.items())
    criterion(4, f"scalar-reference equivalence on {n} instances per operation", ok, detail)


def test_5_dilation_arithmetic(criterion):
    sched = dilation_schedule(SPEC)
    cs = scale_pan(KITTI_CS_VL, "cityscapes", 153.0)
    vl = scale_pan(KITTI_CS_VL, "viclab", 153.0)
    ok = (sched == [4.78125, 3.1875, 1.59375] and abs(cs - 22 / 54 * 153) < 1e-9
          and abs(vl - 12 / 54 * 153) < 1e-9)
    criterion(5, "dilation schedule exact, baseline scaling", ok,
              f"schedule {sched}, cs {cs:.9f}, vl {vl:.9f}")


@pytest.mark.slow
def test_6_toy_learnability(criterion):
    t0 = time.perf_counter()
    single = make_scene("noise", 64, 96, [19.125], seed=0)
    s1, _ = train_toy(single, SPEC, 500, seed=0)
    e1 = eval_toy(s1, single, SPEC)
    ratio1 = s1.loss_history[-1] / s1.loss_history[0]

    layered = make_scene("noise", 64, 96, [19.125, 9.5625], seed=0)
    s2, _ = train_toy(layered, SPEC, 500, seed=0)
    e2 = eval_toy(s2, layered, SPEC)
    ratio2 = s2.loss_history[-1] / s2.loss_history[0]
    dt = time.perf_counter() - t0
    ok = ratio1 < 0.1 and e1["disp_mae"] < 1 / 32 and e2["depth"].a1 > 0.9 and dt < 120.0
    criterion(6, "toy scenes: loss < 10% of initial, disparity MAE < 1/32, a1 > 0.9", ok,
              f"single ratio {ratio1:.4f} mae {e1['disp_mae']:.5f}; two-layer ratio {ratio2:.4f} "
              f"a1 {e2['depth'].a1:.4f}; {dt:.1f} s")


def test_7_stack_determinism(criterion):
    img = np.random.default_rng(3).random((16, 24, 3))
    st = build_stack(img, 153.0, 0.8, 32)
    lvl0 = np.array_equal(st.level(0), downscale_bilinear_2x(img))
    strides = st.strides()
    exact = all(strides[n] == n * strides[1] for n in range(32))
    flat = build_stack(img, 153.0, 0.0, 32)
    collapsed = all(np.array_equal(lv, flat.level(0)) for lv in flat.levels)
    criterion(7, "stack level 0, stride multiples, zero max_disp collapse",
              lvl0 and exact and collapsed and strides[1] == 153 / 32 * 0.8)


def test_8_spp(criterion):
    rng = np.random.default_rng(4)
    df, db, a = rng.random((5, 6, 1)), rng.random((5, 6, 1)), rng.normal(size=(5, 6, 1))
    mean_ok = np.array_equal(spp_blend(df, db, a, a), 0.5 * df + 0.5 * db)
    one, zero = np.ones((5, 6, 1)), np.zeros((5, 6, 1))
    fwd = spp_blend(one, zero, a + 20, a)
    bwd = spp_blend(one, zero, a - 20, a)
    ok = mean_ok and np.all(fwd > 1 - 1e-8) and np.all(bwd < 1e-8)
    criterion(8, "spp mean on equal logits, +-20 gap saturates", bool(ok),
              f"min fwd weight {fwd.min():.12f}, max bwd weight {bwd.max():.2e}")


def test_9_thread_invariance(criterion, tmp_path, capsys):
    runs = []
    for n in (1, 8):
        d = tmp_path / f"t{n}"
        cmds, t = _run_all(d, n)
        codes, outs = [], []
        for c in cmds:
            codes.append(main(t + c))
            outs.append(capsys.readouterr().out.replace(str(d), "<d>"))
        files = {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}
        runs.append((codes, outs, files))
    (c1, o1, f1), (c8, o8, f8) = runs
    diff = sorted(k for k in f1 if f1[k] != f8.get(k))
    ok = c1 == c8 == [0] * len(c1) and o1 == o8 and f1.keys() == f8.keys() and not diff
    criterion(9, "all commands byte-identical with --threads 1 and 8", ok,
              f"{len(c1)} commands, {len(f1)} files, differing {diff}")
