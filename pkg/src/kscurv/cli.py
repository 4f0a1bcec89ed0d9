"""Command-line front end: run manifest tasks and emit reports.

Exit status: 0 when every check passes, 1 when some check fails, 2 when a
task cannot be executed (bad manifest, domain error, insufficient jets...).
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass

import numpy as np

from . import classify as cl
from . import conditions as cond
from . import expr as ex
from . import geometry as geo
from . import manifest as mf
from . import models as md
from . import penrose as pr

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2
TSV_FIELDS = ("task", "kind", "check", "point", "quantity", "value", "tolerance", "status", "note")
SHARPNESS_FACTOR = 1e3
FD_TOL = 1e-5
FD_STEP = 1e-3


class TaskError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# report records
# ---------------------------------------------------------------------------

def fmt_float(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return "%.17g" % x
    return str(x)


def fmt_point(p) -> str:
    if p is None:
        return ""
    return ",".join(fmt_float(float(x)) for x in p)


@dataclass
class Record:
    task: int
    kind: str
    check: str
    point: tuple | None
    quantity: str
    value: object
    tolerance: float | None = None
    status: str = "info"  # pass | fail | info | warn
    note: str = ""

    def fields(self) -> list:
        return [str(self.task), self.kind, self.check, fmt_point(self.point), self.quantity,
                fmt_float(self.value), "" if self.tolerance is None else fmt_float(self.tolerance),
                self.status, self.note.replace("\t", " ").replace("\n", " ")]


def render_tsv(records) -> str:
    lines = ["\t".join(TSV_FIELDS)]
    lines += ["\t".join(r.fields()) for r in records]
    return "\n".join(lines) + "\n"


def _short(x) -> str:
    if isinstance(x, (float, np.floating)):
        return "%.6g" % float(x)
    return str(x)


def render_text(records) -> str:
    out = []
    for r in records:
        where = f" @({', '.join('%.4g' % v for v in r.point)})" if r.point is not None else ""
        tol = f" tol={r.tolerance:g}" if r.tolerance is not None else ""
        status = r.status.upper() if r.status in ("pass", "fail", "warn") else "    "
        note = f"  # {r.note}" if r.note else ""
        out.append(f"{status:4s} [{r.task}:{r.kind}/{r.check}]{where} {r.quantity} = {_short(r.value)}{tol}{note}")
    return "\n".join(out) + ("\n" if out else "")


def _passfail(ok: bool) -> str:
    return "pass" if ok else "fail"


# ---------------------------------------------------------------------------
# execution context
# ---------------------------------------------------------------------------

@dataclass
class Context:
    manifest: mf.Manifest | None
    tolerance: float | None = None
    jet_order: int | None = None
    points: int | None = None
    seed: int | None = None

    def tol(self, task: dict, default: float) -> float:
        if "tolerance" in task:
            return float(task["tolerance"])
        return self.tolerance if self.tolerance is not None else default

    def require_order(self, k_max: int) -> None:
        need = k_max + 2
        if self.jet_order is not None and need > self.jet_order:
            raise TaskError(f"task needs metric jets of order {need}, but --jet-order is {self.jet_order}")

    def chart(self) -> geo.ChartSpec:
        return self.manifest.chart()

    def sample(self) -> list:
        pts = self.manifest.sample_points(self.points, self.seed)
        if not pts:
            raise TaskError("no points to evaluate")
        return pts


def _report_records(idx, kind, check, rep: cond.ResidualReport, quantity="relative_residual"):
    recs = []
    for p, rel in zip(rep.points, rep.relative):
        recs.append(Record(idx, kind, check, p, quantity, float(rel), rep.tolerance,
                           _passfail(rel < rep.tolerance)))
    return recs


# ---------------------------------------------------------------------------
# tasks
# ---------------------------------------------------------------------------

def task_classify(ctx: Context, idx: int, task: dict) -> list:
    ctx.require_order(0)
    chart, tol = ctx.chart(), ctx.tol(task, cl.DEFAULT_TOL)
    expect = task.get("expect")
    recs, labels = [], []
    for p in ctx.sample():
        b = geo.curvature_bundle(chart, p, k_max=0)
        res = cl.classify_bundle(b, tol)
        name = res.label.name
        labels.append(name)
        status = "info" if expect is None else _passfail(name == expect)
        recs.append(Record(idx, "classify", "type", p, "label", name, None, status,
                           "" if expect is None else f"expected {expect}"))
        recs.append(Record(idx, "classify", "type", p, "dim_L", res.l.dimension))
        recs.append(Record(idx, "classify", "type", p, "scalar", res.scalar))
        recs.append(Record(idx, "classify", "type", p, "ricci_rank", res.ricci_rank))
        gb_rel = abs(res.gauss_bonnet) / max(cl.gauss_bonnet_scale(b), 1e-300)
        if res.label.family in ("I", "II"):
            recs.append(Record(idx, "classify", "gauss_bonnet", p, "relative", gb_rel, tol,
                               _passfail(gb_rel < tol)))
            for key in sorted(res.identities):
                if key in ("scalar_nonzero",):
                    recs.append(Record(idx, "classify", "identity", p, key, res.identities[key]))
                    continue
                v = res.identities[key]
                recs.append(Record(idx, "classify", "identity", p, key, v, tol, _passfail(v < tol)))
            if res.decomposition is not None:
                d = res.decomposition
                recs.append(Record(idx, "classify", "decomposition", p, "reconstruction", d.residual,
                                   tol, _passfail(d.residual < tol)))
                if d.A is not None:
                    recs.append(Record(idx, "classify", "decomposition", p, "A", d.A))
        else:
            recs.append(Record(idx, "classify", "gauss_bonnet", p, "value", res.gauss_bonnet))
        if res.label.name == "Type0":
            gen = cl.generic_test(b, tol)
            recs.append(Record(idx, "classify", "generic", p, "generic", gen.generic, None, "info",
                               f"cond={gen.condition:.3e}"))
            if gen.generic:
                recs.append(Record(idx, "classify", "generic", p, "inverse_residual",
                                   gen.inverse_residual, tol, _passfail(gen.inverse_residual < tol)))
            fits, k = cl.constant_curvature_check(b, tol)
            recs.append(Record(idx, "classify", "constant_curvature", p, "k", k, None, "info",
                               "fits" if fits else "does not fit"))
    agree = len(set(labels)) <= 1
    recs.append(Record(idx, "classify", "consistency", None, "labels_agree", agree, None,
                       "info" if agree else "warn", ",".join(sorted(set(labels)))))
    return recs


def task_check(ctx: Context, idx: int, task: dict) -> list:
    kind = task.get("kind")
    chart = ctx.chart()
    pts = ctx.sample()
    tol = ctx.tol(task, cond.DEFAULT_TOL)
    recs = []
    if kind == "r_symmetric":
        r = int(task.get("r", 1))
        ctx.require_order(r)
        rep = cond.check_r_symmetric(chart, r, pts, tol)
        recs += _report_records(idx, "check", f"r_symmetric[r={r}]", rep)
        proper = rep.details["proper"]
        exp = task.get("proper")
        recs.append(Record(idx, "check", f"r_symmetric[r={r}]", None, "proper", proper, None,
                           "info" if exp is None else _passfail(bool(exp) == proper),
                           f"relative |nabla^{r - 1} R| = {rep.details['lower_norm']:.3e}"))
    elif kind == "recurrent":
        r = int(task.get("r", 1))
        ctx.require_order(r)
        res = cond.recover_recurrence(chart, r, pts, tol)
        for p, rel, T in zip(res.points, res.relative, res.tensors):
            recs.append(Record(idx, "check", f"recurrent[r={r}]", p, "relative_residual", float(rel),
                               tol, _passfail(rel < tol)))
            if r == 1:
                recs.append(Record(idx, "check", f"recurrent[r={r}]", p, "sigma",
                                   "[" + ",".join(fmt_float(float(x)) for x in T) + "]"))
            else:
                recs.append(Record(idx, "check", f"recurrent[r={r}]", p, "tensor_norm",
                                   float(np.linalg.norm(T))))
    elif kind == "semi_symmetric":
        ctx.require_order(2)
        rep = cond.check_semi_symmetric(chart, pts, tol)
        recs += _report_records(idx, "check", "semi_symmetric", rep)
    elif kind == "half_2p":
        p_ = int(task.get("p", 1))
        ctx.require_order(2 * p_)
        rep = cond.check_half_2p_symmetric(chart, p_, pts, tol)
        recs += _report_records(idx, "check", f"half_2p[p={p_}]", rep)
    elif kind == "ldc":
        r = int(task.get("r", 1))
        ctx.require_order(r)
        t = task.get("t", [])
        t_fields = tuple(np.array(x, dtype=object) for x in t)
        spec = cond.ConditionSpec(r, t_fields, None, task.get("target", "riemann"))
        rep = cond.ldc_residual(chart, spec, pts, tol)
        recs += _report_records(idx, "check", f"ldc[{spec.target},r={r}]", rep)
    elif kind == "homothety":
        X = task.get("X")
        if X is None:
            raise TaskError("homothety check needs a vector field X")
        ctx.require_order(3)
        res = cond.fit_homothety(chart, X, pts, tol)
        for p, c, rel in zip(res.points, res.c, res.relative):
            recs.append(Record(idx, "check", "homothety", p, "relative_residual", float(rel), tol,
                               _passfail(rel < tol)))
            recs.append(Record(idx, "check", "homothety", p, "c", float(c)))
        recs.append(Record(idx, "check", "homothety", None, "parallel", res.parallel))
        recs.append(Record(idx, "check", "homothety", None, "lightlike", res.lightlike))
    elif kind == "parallel_square":
        sel = task.get("tensor", "riemann")
        k = int(sel[5:]) if sel.startswith("nabla") else 0
        ctx.require_order(k + 2)
        rep = cond.classify_parallel_square(chart, sel, pts, tol)
        expect = task.get("expect")
        for p, lab, f in zip(rep.points, rep.labels, rep.f):
            recs.append(Record(idx, "check", f"parallel_square[{sel}]", p, "case", lab, None,
                               "info" if expect is None else _passfail(lab == expect)))
            recs.append(Record(idx, "check", f"parallel_square[{sel}]", p, "f", float(f)))
    elif kind == "constant_curvature":
        ctx.require_order(0)
        for p in pts:
            fits, k = cl.constant_curvature_check(geo.curvature_bundle(chart, p), tol)
            recs.append(Record(idx, "check", "constant_curvature", p, "k", k, tol, _passfail(fits)))
    elif kind == "gauss_bonnet":
        ctx.require_order(0)
        for p in pts:
            b = geo.curvature_bundle(chart, p)
            rel = abs(cl.gauss_bonnet(b)) / max(cl.gauss_bonnet_scale(b), 1e-300)
            recs.append(Record(idx, "check", "gauss_bonnet", p, "relative", rel, tol,
                               _passfail(rel < tol)))
    elif kind == "oracle":
        recs += _oracle_records(ctx, idx, chart, pts, task)
    else:
        raise TaskError(f"unknown check kind {kind!r}")
    return recs


def _oracle_records(ctx, idx, chart, pts, task):
    step = float(task.get("step", FD_STEP))
    tol = float(task.get("fd_tolerance", FD_TOL))
    ctx.require_order(1)
    recs = []
    for p in pts:
        b = geo.curvature_bundle(chart, p, k_max=1)
        fd = geo.fd_oracle_curvature(chart, p, step).value
        R = b.riemann.value
        scale = max(np.linalg.norm(R), 1.0)
        err = float(np.linalg.norm(fd - R) / scale)
        recs.append(Record(idx, "oracle", "finite_difference", p, "relative_error", err, tol,
                           _passfail(err < tol), f"step={step:g}"))
        bi = geo.second_bianchi_residual(b)
        recs.append(Record(idx, "oracle", "second_bianchi", p, "relative", bi, cond.DEFAULT_TOL,
                           _passfail(bi < cond.DEFAULT_TOL)))
    return recs


# --- named models -----------------------------------------------------------

def _matrix(task, key, default=None):
    if key not in task:
        if default is None:
            raise TaskError(f"model needs parameter {key!r}")
        return default
    return tuple(tuple(float(x) for x in row) for row in task[key])


def _poly_params(task: dict) -> md.PolySymmetric:
    given = [task[k] for k in ("D", "B", "C") if k in task]
    if not given:
        raise TaskError("poly_symmetric model needs D or B")
    m = len(given[0])
    zero = tuple((0.0,) * m for _ in range(m))
    return md.PolySymmetric(_matrix(task, "D", zero), _matrix(task, "B", zero), _matrix(task, "C", zero))


def build_named(task: dict) -> md.ModelFamilySpec:
    variant = task.get("variant")
    u_range = tuple(float(x) for x in task.get("u_range", (-1.0, 1.0)))
    eta = task.get("eta")
    if variant == "cahen_wallach":
        return md.make_named(md.CahenWallach(_matrix(task, "A")), u_range, eta)
    if variant == "walker":
        return md.make_named(md.Walker(task.get("F", "exp(u)"), _matrix(task, "M")), u_range, eta)
    if variant == "poly_symmetric":
        return md.make_named(_poly_params(task), u_range, eta)
    if variant == "thompson":
        u0 = float(task.get("u0", min(max(0.0, u_range[0]), u_range[1])))
        params = md.Thompson(task.get("f", "1+u^2"), float(task.get("kappa", 1.0)),
                             float(task.get("h0", 0.0)), float(task.get("hdot0", 0.0)),
                             float(task.get("beta0", 0.0)), u0)
        return md.make_named(params, u_range)
    if variant == "recurrent_ksym":
        return md.recurrent_and_ksym_instance(int(task.get("k", 2)),
                                              tuple(task.get("u_range", (0.5, 2.0))))
    if variant == "family":
        A = task.get("A")
        if A is None:
            raise TaskError("family model needs a profile A")
        prof = md.ExprProfile.parse(A)
        B = md.ExprProfile.parse(task["B"]) if "B" in task else None
        m = prof.size
        return md.ModelFamilySpec(m + 2, tuple(eta or (1,) * m), prof, B,
                                  tuple(task["a"]) if "a" in task else None, u_range=u_range,
                                  label="family")
    raise TaskError(f"unknown model variant {variant!r}")


def task_model(ctx: Context, idx: int, task: dict) -> list:
    spec = build_named(task)
    variant = task.get("variant")
    tol = ctx.tol(task, cond.ODE_TOL if variant == "thompson" else cond.DEFAULT_TOL)
    count = ctx.points or int(task.get("samples", 7))
    pts = md.sample_points(spec, count, ctx.seed or 0)
    chart = spec.chart()
    recs = [Record(idx, "model", variant, None, "signature",
                   f"({spec.signature[0]},{spec.signature[1]})")]

    def add(rep, name):
        recs.extend(_report_records(idx, "model", name, rep))

    if variant == "cahen_wallach":
        ctx.require_order(1)
        add(cond.check_r_symmetric(chart, 1, pts, tol), "r_symmetric[r=1]")
    elif variant in ("walker", "recurrent_ksym"):
        ctx.require_order(1)
        res = cond.recover_recurrence(chart, 1, pts, tol)
        for p, rel, s in zip(res.points, res.relative, res.tensors):
            recs.append(Record(idx, "model", "recurrent[r=1]", p, "relative_residual", float(rel),
                               tol, _passfail(rel < tol)))
            lay_vals = spec.profile.taylor(p[0], 1)
            k = np.unravel_index(np.argmax(np.abs(lay_vals[..., 0])), lay_vals.shape[:2])
            ratio = lay_vals[k][1] / lay_vals[k][0]
            recs.append(Record(idx, "model", "recurrent[r=1]", p, "sigma_u", float(s[0]), None,
                               "info", f"F'/F = {fmt_float(ratio)}"))
        recs.append(Record(idx, "model", "recurrent[r=1]", None, "sigma_sign", "+F'/F du", None,
                           "info", "fitted recurrence form is +(F'/F) du; the often-quoted "
                                   "-(F'/F) du has the opposite sign (sign discrepancy)"))
        if variant == "recurrent_ksym":
            k = int(task.get("k", 2))
            ctx.require_order(k)
            add(cond.check_r_symmetric(chart, k, pts, tol), f"r_symmetric[r={k}]")
    elif variant == "poly_symmetric":
        order = md.poly_symmetry_order(_poly_params(task))
        ctx.require_order(order)
        rep = cond.check_r_symmetric(chart, order, pts, tol)
        add(rep, f"r_symmetric[r={order}]")
        low = cond.check_r_symmetric(chart, order - 1, pts, tol)
        sharp = low.max_relative > SHARPNESS_FACTOR * tol
        recs.append(Record(idx, "model", f"r_symmetric[r={order - 1}]", None, "sharpness",
                           low.max_relative, SHARPNESS_FACTOR * tol, _passfail(sharp),
                           "lower order must fail"))
    elif variant == "thompson":
        ctx.require_order(2)
        res = cond.recover_recurrence(chart, 2, pts, tol)
        p0 = task.get("f", "1+u^2")
        kappa = float(task.get("kappa", 1.0))
        for p, rel, T in zip(res.points, res.relative, res.tensors):
            tau = md.thompson_tau(p0, kappa, p[0])
            expected = tau * md.du_power(4, 2)
            err = float(np.linalg.norm(T - expected) / max(abs(tau), 1e-300))
            recs.append(Record(idx, "model", "recurrent[r=2]", p, "relative_residual", float(rel),
                               tol, _passfail(rel < tol)))
            recs.append(Record(idx, "model", "recurrent[r=2]", p, "tensor_error", err, tol,
                               _passfail(err < tol), "against (f''/f - kappa^2/f^4) du du"))
        ric = max(np.linalg.norm(geo.curvature_bundle(chart, p).ricci.value) for p in pts)
        h_zero = task.get("h0", 0.0) == 0 and task.get("hdot0", 0.0) == 0
        recs.append(Record(idx, "model", "ricci_flat", None, "max_ricci", float(ric), tol,
                           _passfail((ric < tol) == h_zero), f"h identically zero: {h_zero}"))
    elif variant == "family":
        ctx.require_order(spec.r)
        if spec.r >= 1:
            us = [p[0] for p in pts]
            ode = md.ode_residual(spec, us, tol)
            ldc = cond.ldc_residual(chart, md.ldc_condition(spec), pts, tol)
            add(ode, f"ode[r={spec.r}]")
            add(ldc, f"ldc[r={spec.r}]")
            recs.append(Record(idx, "model", "equivalence", None, "agree", ode.passed == ldc.passed,
                               None, _passfail(ode.passed == ldc.passed)))
    emit = task.get("emit")
    if emit:
        if isinstance(spec.profile, md.ExprProfile):
            man = mf.chart_manifest(chart, pts)
            with open(emit, "w") as fh:
                fh.write(mf.dumps(man))
            recs.append(Record(idx, "model", "emit", None, "manifest", emit))
        else:
            recs.append(Record(idx, "model", "emit", None, "manifest", "", None, "warn",
                               "ODE profiles have no closed-form metric to emit"))
    return recs


def task_penrose(ctx: Context, idx: int, task: dict) -> list:
    chart = ctx.chart()
    x0 = task.get("x0")
    v0 = task.get("v0")
    if x0 is None or v0 is None:
        raise TaskError("penrose task needs x0 and v0")
    rng = tuple(task.get("range", (-2.0, 2.0)))
    samples = int(task.get("samples", 41))
    tol = ctx.tol(task, cond.ODE_TOL)
    geod, frame, prof, limit = pr.penrose_limit(chart, x0, v0, rng, samples)
    recs = [Record(idx, "penrose", "geodesic", None, "null_drift", geod.null_drift, pr.DRIFT_TOL,
                   _passfail(geod.null_drift < pr.DRIFT_TOL)),
            Record(idx, "penrose", "frame", None, "gram_drift", frame.gram_drift, pr.GRAM_TOL,
                   _passfail(frame.gram_drift < pr.GRAM_TOL))]
    pmax = float(np.max(np.abs(prof.P)))
    exp_flat = task.get("expect_flat")
    recs.append(Record(idx, "penrose", "profile", None, "max_abs", pmax,
                       tol if exp_flat is not None else None,
                       "info" if exp_flat is None else _passfail((pmax < tol) == bool(exp_flat))))
    m = prof.P.shape[1]
    for u, P in zip(prof.u, prof.P):
        for i in range(m):
            for j in range(i, m):
                recs.append(Record(idx, "penrose", "profile", None, f"P[{i},{j}]({fmt_float(u)})",
                                   float(P[i, j])))
    lim_chart = limit.chart()
    worst = 0.0
    for p in md.sample_points(limit, 5):
        worst = max(worst, abs(float(geo.curvature_bundle(lim_chart, p).scalar.value)))
    recs.append(Record(idx, "penrose", "limit_model", None, "max_abs_scalar", worst,
                       cond.DEFAULT_TOL, _passfail(worst < cond.DEFAULT_TOL)))
    emit = task.get("emit")
    if emit:
        with open(emit, "w") as fh:
            fh.write(mf.dumps(mf.chart_manifest(lim_chart, md.sample_points(limit, 3))))
        recs.append(Record(idx, "penrose", "emit", None, "manifest", emit))
    return recs


def task_report(ctx: Context, idx: int, task: dict) -> list:
    ctx.require_order(1)
    chart = ctx.chart()
    recs = []
    for p in ctx.sample():
        b = geo.curvature_bundle(chart, p, k_max=1)
        sig = geo.signature(chart, p)
        recs.append(Record(idx, "report", "curvature", p, "signature", f"({sig[0]},{sig[1]})"))
        recs.append(Record(idx, "report", "curvature", p, "scalar", float(b.scalar.value)))
        recs.append(Record(idx, "report", "curvature", p, "riemann_norm",
                           float(np.linalg.norm(b.riemann.value))))
        recs.append(Record(idx, "report", "curvature", p, "gauss_bonnet", cl.gauss_bonnet(b)))
    recs += _oracle_records(ctx, idx, chart, ctx.sample(), task)
    return recs


TASKS = {"classify": task_classify, "check": task_check, "model": task_model,
         "penrose": task_penrose, "report": task_report}


def run(manifest: mf.Manifest, tolerance=None, jet_order=None, points=None, seed=None,
        tasks=None) -> tuple:
    """Execute tasks in order; returns ``(records, exit_code, error_message)``."""
    ctx = Context(manifest, tolerance, jet_order, points, seed)
    records = []
    todo = manifest.tasks if tasks is None else tasks
    for idx, task in enumerate(todo):
        kind = task.get("task")
        try:
            records += TASKS[kind](ctx, idx, task)
        except (TaskError, mf.ManifestError, cond.ConditionError, md.ModelError, pr.PenroseError,
                cl.ClassificationError, geo.DegenerateMetric, geo.JetOrderExhausted,
                ArithmeticError, ValueError, KeyError, TypeError) as e:
            return records, EXIT_ERROR, f"task {idx} ({kind}): {e}"
    failed = any(r.status == "fail" for r in records)
    return records, (EXIT_FAIL if failed else EXIT_OK), ""


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def _value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tolerance", type=float, default=None, help="override check tolerances")
    p.add_argument("--jet-order", type=int, default=None, help="maximum metric jet order")
    p.add_argument("--points", type=int, default=None, help="resample N points in the box")
    p.add_argument("--seed", type=int, default=None, help="seed for box sampling")
    p.add_argument("--tsv", default=None, help="write the machine-readable report here ('-' = stdout)")
    p.add_argument("--quiet", action="store_true", help="suppress the human-readable report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kscurv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("report", help="run every task of a manifest")
    p.add_argument("manifest")
    _common(p)

    p = sub.add_parser("classify", help="classify the curvature at the manifest points")
    p.add_argument("manifest")
    p.add_argument("--expect", default=None, help="expected type label")
    _common(p)

    p = sub.add_parser("check", help="run check tasks (or a single check given by --kind)")
    p.add_argument("manifest")
    p.add_argument("--kind", default=None)
    p.add_argument("--r", type=int, default=None)
    p.add_argument("--p", type=int, default=None)
    _common(p)

    p = sub.add_parser("model", help="build a named model and verify its defining property")
    p.add_argument("variant", choices=["cahen_wallach", "walker", "poly_symmetric", "thompson",
                                       "recurrent_ksym", "family"])
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="model parameter (TOML value syntax, e.g. M=[[1,0],[0,0]])")
    p.add_argument("--emit", default=None, help="write the model chart as a manifest")
    _common(p)

    p = sub.add_parser("penrose", help="Penrose-limit profile along a null geodesic")
    p.add_argument("manifest")
    p.add_argument("--x0", default=None, help="initial point, e.g. [0,0,0,0]")
    p.add_argument("--v0", default=None, help="initial velocity")
    p.add_argument("--range", nargs=2, type=float, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--emit", default=None, help="write the limit plane wave as a manifest")
    _common(p)

    p = sub.add_parser("oracle", help="finite-difference and Bianchi cross-checks")
    p.add_argument("manifest")
    p.add_argument("--step", type=float, default=FD_STEP)
    _common(p)
    return parser


def _emit(records, args) -> None:
    if not args.quiet:
        sys.stdout.write(render_text(records))
    if args.tsv == "-":
        sys.stdout.write(render_tsv(records))
    elif args.tsv:
        with open(args.tsv, "w") as fh:
            fh.write(render_tsv(records))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "model":
            task = {"task": "model", "variant": args.variant}
            for item in args.set:
                if "=" not in item:
                    raise mf.ManifestError(f"--set expects KEY=VALUE, got {item!r}")
                k, v = item.split("=", 1)
                task[k.strip()] = _value(v.strip())
            if args.emit:
                task["emit"] = args.emit
            man = mf.Manifest("", (), {}, {}, [], None, 0, 0, [task])
            tasks = None
        else:
            man = mf.load_manifest(args.manifest)
            tasks = None
            if args.command == "classify":
                t = {"task": "classify"}
                if args.expect:
                    t["expect"] = args.expect
                tasks = [t]
            elif args.command == "check":
                if args.kind:
                    t = {"task": "check", "kind": args.kind}
                    if args.r is not None:
                        t["r"] = args.r
                    if args.p is not None:
                        t["p"] = args.p
                    tasks = [t]
                else:
                    tasks = [t for t in man.tasks if t.get("task") == "check"]
            elif args.command == "penrose":
                if args.x0 is not None:
                    t = {"task": "penrose", "x0": _value(args.x0), "v0": _value(args.v0 or "[]")}
                    if args.range:
                        t["range"] = list(args.range)
                    if args.samples:
                        t["samples"] = args.samples
                    if args.emit:
                        t["emit"] = args.emit
                    tasks = [t]
                else:
                    tasks = [t for t in man.tasks if t.get("task") == "penrose"]
            elif args.command == "oracle":
                tasks = [{"task": "check", "kind": "oracle", "step": args.step}]
            elif not man.tasks:
                tasks = [{"task": "report"}]
    except (mf.ManifestError, ex.ExprSyntaxError, ex.UnknownIdentifier) as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_ERROR
    records, code, message = run(man, args.tolerance, args.jet_order, args.points, args.seed, tasks)
    _emit(records, args)
    if message:
        sys.stderr.write(f"error: {message}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
