"""Oracle-equivalence and invariant checks behind ``useanet verify``.

Every check is a function ``(rng) -> (passed, detail)`` registered under a
stable name. :func:`run` executes a selection and returns results sorted by
name. :func:`inject_fault` swaps in a deliberately broken component so the
harness itself can be shown to catch it.
"""

from __future__ import annotations

import contextlib
import io
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import autodiff as ad
from . import blocks
from . import kernels as K
from . import oracles
from .checkpoint import dumps, loads
from .data import split
from .metrics import metrics
from .model import HFA, ModelConfig, USEANet, uade
from .profiler import count_store, profile_model

ORACLE_CASES = 100
ORACLE_TOL = 1e-5


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name:28s} {self.detail}"


CHECKS: dict[str, Callable[[np.random.Generator], tuple[bool, str]]] = {}


def check(name: str):
    def register(fn):
        CHECKS[name] = fn
        return fn
    return register


def _f32(rng, *shape):
    return rng.standard_normal(shape).astype(np.float32)


def _max_delta(cases) -> float:
    return max(float(np.abs(np.asarray(a, np.float64) - b).max()) for a, b in cases)


def _oracle_result(cases) -> tuple[bool, str]:
    delta = _max_delta(cases)
    return delta <= ORACLE_TOL, f"{len(cases)} cases, max |d| = {delta:.2e}"


# ---------------------------------------------------------------------------
# kernels against brute-force oracles


def random_conv_case(rng, depthwise: bool = False):
    """Small random convolution problem: (x, weight, bias, stride, padding, groups)."""
    n = int(rng.integers(1, 3))
    k = int(rng.choice([1, 3, 5]))
    stride = int(rng.integers(1, 3))
    pad = int(rng.integers(0, k // 2 + 1))
    h = int(rng.integers(max(1, k - 2 * pad), 8))
    w = int(rng.integers(max(1, k - 2 * pad), 8))
    c = int(rng.integers(1, 5))
    if depthwise:
        return _f32(rng, n, c, h, w), _f32(rng, c, 1, k, k), None, stride, pad, c
    groups = int(rng.choice([g for g in (1, 2, c) if c % g == 0]))
    cout = groups * int(rng.integers(1, 3))
    bias = _f32(rng, cout) if rng.random() < 0.5 else None
    return _f32(rng, n, c, h, w), _f32(rng, cout, c // groups, k, k), bias, stride, pad, groups


@check("oracle-conv2d")
def _oracle_conv(rng):
    cases = []
    for _ in range(ORACLE_CASES):
        x, wt, b, s, p, g = random_conv_case(rng)
        cases.append((K.conv2d(x, wt, b, s, p, g), oracles.conv2d(x, wt, b, (s, s), (p, p), g)))
    return _oracle_result(cases)


@check("oracle-dwconv2d")
def _oracle_dw(rng):
    cases = []
    for _ in range(ORACLE_CASES):
        x, wt, _, s, p, _ = random_conv_case(rng, depthwise=True)
        cases.append((K.dwconv2d(x, wt, None, s, p), oracles.dwconv2d(x, wt, (s, s), (p, p))))
    return _oracle_result(cases)


def random_pool_case(rng):
    mode = str(rng.choice(["avg", "max"]))
    k = int(rng.integers(1, 4))
    stride = int(rng.integers(1, 3))
    pad = int(rng.integers(0, k // 2 + 1))
    h, w = int(rng.integers(k, 8)), int(rng.integers(k, 8))
    return _f32(rng, int(rng.integers(1, 3)), int(rng.integers(1, 4)), h, w), mode, k, stride, pad


@check("oracle-pool2d")
def _oracle_pool(rng):
    cases = []
    for _ in range(ORACLE_CASES):
        x, mode, k, s, p = random_pool_case(rng)
        cases.append((K.pool2d(x, mode, k, s, p), oracles.pool2d(x, mode, (k, k), (s, s), (p, p))))
    return _oracle_result(cases)


@check("oracle-resize")
def _oracle_resize(rng):
    cases = []
    for _ in range(ORACLE_CASES):
        x = _f32(rng, 1, int(rng.integers(1, 3)), int(rng.integers(1, 7)), int(rng.integers(1, 7)))
        oh, ow = int(rng.integers(1, 10)), int(rng.integers(1, 10))
        cases.append((K.bilinear_resize(x, oh, ow), oracles.bilinear_resize(x, oh, ow)))
    return _oracle_result(cases)


@check("oracle-matmul")
def _oracle_matmul(rng):
    cases = []
    for _ in range(ORACLE_CASES):
        m, k, n = (int(v) for v in rng.integers(1, 8, size=3))
        a, b = _f32(rng, m, k), _f32(rng, k, n)
        cases.append((K.matmul(a, b), oracles.matmul(a, b)))
    return _oracle_result(cases)


@check("oracle-batch-norm")
def _oracle_bn(rng):
    cases = []
    for _ in range(ORACLE_CASES // 4):
        x = _f32(rng, 2, 3, 4, 4)
        gamma, beta = _f32(rng, 3), _f32(rng, 3)
        y, _, _ = K.batch_norm(x, gamma, beta, training=True, eps=1e-5)
        cases.append((y, oracles.batch_norm_train(x, gamma, beta, 1e-5)))
    return _oracle_result(cases)


@check("oracle-stencil")
def _oracle_stencil(rng):
    cases = []
    for _ in range(ORACLE_CASES // 4):
        c = int(rng.integers(1, 4))
        x, kernel = _f32(rng, int(rng.integers(1, 3)), c, int(rng.integers(1, 7)), int(rng.integers(1, 7))), _f32(rng, c, 1, 3, 3)
        cases.append((K.stencil3x3(x, kernel), oracles.dwconv2d(x, kernel, (1, 1), (1, 1))))
    return _oracle_result(cases)


@check("conv-linearity")
def _linearity(rng):
    worst = 0.0
    for _ in range(20):
        x, wt, _, s, p, g = random_conv_case(rng)
        y = _f32(rng, *x.shape)
        a, b = float(rng.normal()), float(rng.normal())
        lhs = K.conv2d(a * x + b * y, wt, None, s, p, g)
        rhs = a * K.conv2d(x, wt, None, s, p, g) + b * K.conv2d(y, wt, None, s, p, g)
        worst = max(worst, float(np.abs(lhs - rhs).max() / max(np.abs(rhs).max(), 1e-12)))
    return worst <= 1e-4, f"max relative |d| = {worst:.2e}"


@check("dwconv-impulse-identity")
def _impulse(rng):
    worst = 0.0
    for k in (1, 3, 5):
        x = _f32(rng, 2, 3, 6, 6)
        wt = np.zeros((3, 1, k, k), np.float32)
        wt[:, 0, k // 2, k // 2] = 1.0
        worst = max(worst, float(np.abs(K.dwconv2d(x, wt, None, 1, k // 2) - x).max()))
    return worst == 0.0, f"max |d| = {worst:.2e}"


@check("parallel-mode")
def _parallel(rng):
    worst = 0.0
    for _ in range(20):
        x, wt, b, s, p, g = random_conv_case(rng)
        with K.threads(0):
            ref = K.conv2d(x, wt, b, s, p, g)
        with K.threads(4):
            par = K.conv2d(x, wt, b, s, p, g)
        worst = max(worst, float(np.abs(ref - par).max()))
    return worst <= 1e-5, f"max |parallel - reference| = {worst:.2e}"


@check("activation-ranges")
def _activations(rng):
    x = rng.normal(0, 10, (4, 5, 6)).astype(np.float32)
    sm = K.softmax(x, axis=1)
    row_err = float(np.abs(sm.sum(axis=1) - 1).max())
    shift_err = float(np.abs(K.softmax(x + 3.0, axis=1) - sm).max())
    sig = K.sigmoid(rng.normal(0, 5, 1000))
    ok = row_err <= 1e-5 and shift_err <= 1e-6 and ((sig > 0) & (sig < 1)).all() and (K.relu(x) >= 0).all()
    return bool(ok), f"softmax rows |1-sum| = {row_err:.1e}, shift |d| = {shift_err:.1e}"


# ---------------------------------------------------------------------------
# architectural invariants


@check("laplacian-stencil")
def _stencil(rng):
    kernel = blocks.laplacian_kernel(4)
    sums = kernel.reshape(4, -1).sum(axis=1)
    const = ad.Var(np.full((1, 4, 6, 6), float(rng.uniform(-5, 5)), np.float32))
    interior = blocks.laplacian(const).value[..., 1:-1, 1:-1]
    ok = bool((sums == 0).all() and (interior == 0).all())
    return ok, f"stencil sums {sorted(set(sums.tolist()))}, constant response max {np.abs(interior).max():.1e}"


@check("mbfp-fusion-weights")
def _fusion(rng):
    m = blocks.MBFP(6, 8, rng=rng)
    m.eval()
    with ad.no_grad():
        m(ad.Var(_f32(rng, 3, 6, 8, 8)))
        w = m.last_weights
        row_err = float(np.abs(w.sum(axis=1) - 1).max())
        m.fusion.weight.value[...] = 0
        m.fusion.bias.value[...] = 0
        m(ad.Var(_f32(rng, 2, 6, 8, 8)))
        uniform = bool((m.last_weights == np.float32(1 / 3)).all())
    ok = row_err <= 1e-5 and bool(((w > 0) & (w < 1)).all()) and uniform
    return ok, f"rows |1-sum| = {row_err:.1e}, zero-init weights exactly 1/3: {uniform}"


@check("mbfp-edge-constant")
def _edge_constant(rng):
    m = blocks.MBFP(4, 4, rng=rng)
    m.eval()
    with ad.no_grad():
        f = m.adapt(ad.Var(np.full((1, 4, 10, 10), 0.7, np.float32)))
        fe = m.edge(f)
        # the branch LConv's own zero padding perturbs a 1-pixel rim, so the
        # Laplacian term is exactly zero from two pixels in
        term = blocks.laplacian(fe).value[..., 2:-2, 2:-2]
    return bool((term == 0).all()), f"interior Laplacian term max {np.abs(term).max():.1e}"


def _zero_params(module) -> None:
    for _, p in module.named_parameters():
        p.value[...] = 0


@check("eca-zero-init")
def _eca(rng):
    m = blocks.ECA(8, rng=rng)
    _zero_params(m)
    x = _f32(rng, 2, 8, 5, 5)
    with ad.no_grad():
        out = m(ad.Var(x)).value
        ch, sp = m.gates(ad.Var(x))
    err = float(np.abs(out - 0.25 * x).max())
    ok = err <= 1e-6 and bool((ch.value == 0.5).all() and (sp.value == 0.5).all())
    return ok, f"|out - 0.25 F| = {err:.1e}"


@check("eaa-zero-init")
def _eaa(rng):
    m = blocks.EAA(8, rng=rng)
    _zero_params(m)
    c = float(rng.uniform(0.5, 3))
    with ad.no_grad():
        out = m(ad.Var(np.full((1, 8, 6, 6), c, np.float32))).value[..., 1:-1, 1:-1]
    err = float(np.abs(out - 0.5 * c).max())
    return err <= 1e-6, f"interior |out - 0.5 c| = {err:.1e}"


@check("eaa-edge-amplification")
def _eaa_step(rng):
    m = blocks.EAA(2, rng=rng)
    _zero_params(m)
    x = np.full((1, 2, 8, 8), 1.0, np.float32)
    x[..., :, 4:] = 2.0
    with ad.no_grad():
        out = m(ad.Var(x)).value
    gain = out / (0.5 * x)
    edge, flat = gain[..., 1:-1, 4], np.concatenate([gain[..., 1:-1, 1:3], gain[..., 1:-1, 6:7]], axis=-1)
    ok = bool(edge.min() > flat.max())
    return ok, f"edge gain {edge.min():.3f} vs flat {flat.max():.3f}"


@check("uade-gating")
def _uade(rng):
    f = np.abs(_f32(rng, 2, 4, 8, 8))
    p = ad.Var(_f32(rng, 2, 1, 4, 4))
    with ad.no_grad():
        same = uade(ad.Var(f), p, p).value
        hi = uade(ad.Var(f), ad.Var(np.full((2, 1, 4, 4), 40.0, np.float32)), ad.Var(np.zeros((2, 1, 4, 4), np.float32))).value
        lo = uade(ad.Var(f), ad.Var(np.full((2, 1, 4, 4), -40.0, np.float32)), ad.Var(np.zeros((2, 1, 4, 4), np.float32))).value
        r = ad.Var(_f32(rng, 2, 1, 4, 4) * 5)
        mixed = uade(ad.Var(f), r, ad.Var(np.zeros_like(r.value))).value
    exact = bool((same == np.float32(1.5) * f).all())
    bounded = bool((mixed >= f).all() and (mixed <= 2 * f).all())
    limits = float(max(np.abs(hi - 2 * f).max(), np.abs(lo - f).max()))
    return exact and bounded and limits <= 1e-6, f"exact 1.5F: {exact}, within [F, 2F]: {bounded}, limits |d| = {limits:.1e}"


@check("hfa-zero-init")
def _hfa(rng):
    m = HFA(8, rng=rng)
    for branch in (m.from3, m.from4):
        _zero_params(branch)
    m.eval()
    f2 = ad.Var(_f32(rng, 1, 8, 8, 8))
    with ad.no_grad():
        fused, _ = m.fuse(f2, ad.Var(_f32(rng, 1, 8, 4, 4)), ad.Var(_f32(rng, 1, 8, 2, 2)))
    return bool((fused.value == f2.value).all()), "F_fuse == F2 exactly with zeroed branches"


@check("attention-rows")
def _attn_rows(rng):
    model = USEANet(ModelConfig.micro(), rng=rng)
    model.eval()
    with ad.no_grad():
        model(_f32(rng, 1, 3, 64, 64))
    maps = model.encoder.attention_maps()
    err = max(float(np.abs(a.sum(axis=-1) - 1).max()) for a in maps)
    return err <= 1e-5, f"{len(maps)} blocks, max |1 - row sum| = {err:.1e}"


@check("forward-determinism")
def _determinism(rng):
    model = USEANet(ModelConfig.micro(), rng=rng)
    model.eval()
    x = _f32(rng, 2, 3, 64, 64)
    x[1] = x[0]
    with ad.no_grad(), K.threads(0):
        a = model(x).final.value
        b = model(x).final.value
    same = bool(np.array_equal(a, b))
    batch = bool(np.array_equal(a[0], a[1]))
    in_range = bool(((a >= 0) & (a <= 1)).all())
    return same and batch and in_range, f"repeat bit-identical: {same}, identical batch items equal: {batch}"


@check("profiler-recount")
def _recount(rng):
    model = USEANet(ModelConfig(), rng=rng)
    report = profile_model(model, 64)
    recount = count_store(model.state_dict())
    parts = sum(v["params"] for v in report.breakdown.values())
    ok = report.params == recount == parts
    return ok, f"traced {report.params}, store {recount}, breakdown sum {parts}"


# ---------------------------------------------------------------------------
# metrics and IO


@check("metric-identity")
def _metric_identity(rng):
    worst = 0.0
    for _ in range(1000):
        shape = tuple(int(v) for v in rng.integers(1, 12, size=2))
        p = rng.random() * 0.9 + 0.05
        r = metrics(rng.random(shape) < p, rng.random(shape) < rng.random())
        worst = max(worst, abs(r.f1 - 2 * r.iou / (1 + r.iou)))
    return worst <= 1e-9, f"1000 pairs, max |F1 - 2J/(1+J)| = {worst:.1e}"


@check("split-properties")
def _split(rng):
    n = int(rng.integers(10, 500))
    ids = [f"case{i:04d}" for i in range(n)]
    seed = int(rng.integers(0, 2**31))
    tr, va, te = split(ids, seed)
    again = split(ids, seed)
    ok = (sorted(tr + va + te) == sorted(ids) and len(set(tr) | set(va) | set(te)) == n
          and (len(tr), len(va)) == (n * 70 // 100, n * 15 // 100) and again == (tr, va, te))
    return ok, f"n={n}: {len(tr)}/{len(va)}/{len(te)}"


@check("checkpoint-roundtrip")
def _checkpoint(rng):
    store = {f"t{i}": _f32(rng, *rng.integers(1, 5, size=int(rng.integers(1, 5)))) for i in range(8)}
    store["edge"] = np.array([np.float32(-0.0)])
    back = loads(dumps(store))
    ok = all(back[k].tobytes() == v.tobytes() and back[k].shape == v.shape for k, v in store.items())
    return ok and set(back) == set(store), f"{len(store)} tensors bit-identical: {ok}"


# ---------------------------------------------------------------------------


def run(seed: int = 0, names=None) -> list[CheckResult]:
    """Run the selected checks (all by default), each from its own seeded generator."""
    results = []
    for name in sorted(CHECKS if names is None else names):
        fn = CHECKS[name]
        rng = np.random.default_rng([seed, sum(name.encode())])
        t0 = time.perf_counter()
        try:
            with K.precision(np.float32):
                passed, detail = fn(rng)
        except Exception as exc:  # a crashing check is a failing check
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(passed), detail, time.perf_counter() - t0))
    return results


FAULTS = ("laplacian-stencil",)


@contextlib.contextmanager
def inject_fault(fault: str):
    """Temporarily break one component; only for exercising the harness."""
    if fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}; choose from {FAULTS}")
    original = blocks.laplacian_kernel

    def corrupted(channels, dtype=np.float32):
        k = original(channels, dtype)
        k[:, 0, 1, 1] += 1  # stencil no longer sums to zero
        return k

    blocks.laplacian_kernel = corrupted
    try:
        yield
    finally:
        blocks.laplacian_kernel = original


def report(results: list[CheckResult], out: io.TextIOBase | None = None) -> str:
    lines = [r.line() for r in results]
    failed = [r.name for r in results if not r.passed]
    lines.append(f"{len(results) - len(failed)}/{len(results)} checks passed"
                 + (f"; failing: {', '.join(failed)}" if failed else ""))
    text = "\n".join(lines)
    if out is not None:
        out.write(text + "\n")
    return text
