"""Command-line front end.

Exit codes: 0 success, 1 domain failure (an assumption fails, no
certificate exists, a schedule does not fit the system), 2 usage or parse
error.  The output directory is taken from ``--out``, else the
``SPHYBRID_OUT_DIR`` environment variable, else the config's
``output_dir``, else ``./sphybrid_out``.
"""

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from . import linalg, model, reference_examples
from .certify import CaseLabel, certify
from .config import RunConfig
from .decouple import check_A22
from .errors import DomainError, InputError, SphybridError
from .pipeline import analyze, prepare
from .simulate import LinearHybridSystem, classify, simulate, witnesses
from .tolerances import DEFAULT_HORIZON, HORIZON_PER_RATE

ENV_OUT = "SPHYBRID_OUT_DIR"
DEFAULT_OUT = "sphybrid_out"
SAMPLES_PER_RUN = 4000


class UsageError(InputError):
    pass


def _out_dir(args, cfg=None):
    d = getattr(args, "out", None) or os.environ.get(ENV_OUT) or (cfg.output_dir if cfg else None) or DEFAULT_OUT
    os.makedirs(d, exist_ok=True)
    return d


def _fmt(x):
    if x is None:
        return "-"
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


# ------------------------------------------------------------------ validate


def validation_findings(spec):
    """Structural findings plus singular fast blocks and non-Hurwitz blocks."""
    findings = [(f.kind, f.message) for f in model.validate(spec)]
    if findings:
        return findings
    _, reordered, _ = prepare(spec)
    for r in check_A22(reordered, raise_on_singular=False):
        if not r.invertible:
            findings.append(
                ("SingularA22", f"mode {r.mode}: fast block A22 must be non-singular "
                                f"(relative determinant {r.relative_det:.3e})")
            )
    if findings:
        return findings
    from .decouple import build_decoupled

    dec = build_decoupled(reordered)
    for i, mb in enumerate(dec.modes):
        for name, A in (("A0", mb.A0), ("A22", mb.A22)):
            if not linalg.is_hurwitz(A):
                findings.append(
                    ("NotHurwitz", f"mode {i}: block {name} must be Hurwitz "
                                   f"(spectral abscissa {linalg.spectral_abscissa(A):.6g})")
                )
    return findings


def cmd_validate(args):
    cfg = RunConfig.load(args.config)
    findings = validation_findings(cfg.system)
    for kind, msg in findings:
        print(f"FINDING {kind}: {msg}")
    if findings:
        return 1
    print("OK: system is valid; fast blocks are invertible and all decoupled blocks are Hurwitz")
    return 0


# ------------------------------------------------------------------ certify


def _analysis(cfg, strict_b3=None, method=None):
    return analyze(
        cfg.system,
        method=method or cfg.method,
        kappa=cfg.kappa,
        overrides=cfg.overrides or None,
        strict_b3=cfg.strict_b3 if strict_b3 is None else strict_b3,
    )


CONST_KEYS = (
    "lam_s lam_f b1 b2 b3 eps1 eps2 beta1 beta2 beta3 "
    "gamma11 gamma12 gamma21 gamma22 delta1 delta2 delta3 delta4"
).split()


def certificate_report(certs):
    lines = []
    if certs:
        c0 = certs[0].constants
        lines.append("constants:")
        for k in CONST_KEYS:
            lines.append(f"  {k:8s} = {_fmt(c0[k])}")
        if "q" in c0:
            lines.append(f"  {'q':8s} = {_fmt(c0['q'])}")
    header = ("epsilon", "case", "eps_star", "a", "tau_closed_form", "tau_bisection", "reduced_tau", "constant_part")
    lines.append("  ".join(f"{h:>15s}" for h in header))
    for c in certs:
        row = (c.epsilon, str(c.case), c.epsilon_star, c.a_param, c.tau_closed_form, c.tau_bisection,
               c.reduced_order_tau, c.constant_part)
        lines.append("  ".join(f"{_fmt(v):>15s}" for v in row))
        if c.closed_form_error:
            lines.append(f"  note: closed form unavailable: {c.closed_form_error}")
    return "\n".join(lines)


def _eps_list(args, cfg):
    eps = list(args.eps) if getattr(args, "eps", None) else list(cfg.eps) or [cfg.system.epsilon]
    if not eps:
        raise UsageError("empty epsilon list")
    return eps


def cmd_certify(args):
    cfg = RunConfig.load(args.config)
    eps_list = _eps_list(args, cfg)
    an = _analysis(cfg, strict_b3=True if args.strict_b3 else None, method=args.method)
    certs = [certify(an.lyap, e) for e in eps_list]
    print(certificate_report(certs))
    out = _out_dir(args, cfg)
    path = os.path.join(out, "certificates.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([c.to_dict() for c in certs], fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {path}")
    return 0


# ------------------------------------------------------------------ simulate


def build_schedule(sched, transitions, horizon, start_mode=0):
    kind = sched.get("kind")
    try:
        if kind == "periodic":
            return model.periodic_schedule(transitions, float(sched["tau"]), horizon, sched.get("start_mode", start_mode))
        if kind == "explicit":
            return model.explicit_schedule(sched["times"], sched["modes"], sched["jumps"], horizon, transitions)
        if kind == "random":
            return model.random_schedule(
                transitions, float(sched["min_gap"]), float(sched["max_gap"]), horizon,
                seed=sched.get("seed"), start_mode=sched.get("start_mode", start_mode),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"schedule {kind!r}: {exc}") from exc
    raise UsageError(f"unknown schedule kind {kind!r}")


def write_trajectory_csv(path, traj):
    n = traj.states.shape[1]
    has_w = traj.W_s is not None
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "mode", "is_post_jump"] + [f"u{i + 1}" for i in range(n)] + ["W_s", "W_f"])
        for k in range(len(traj)):
            d = traj.dims[traj.mode[k]]
            u = [repr(float(v)) for v in traj.states[k, :d]] + [""] * (n - d)
            ws = [repr(float(traj.W_s[k])), repr(float(traj.W_f[k]))] if has_w else ["", ""]
            w.writerow([repr(float(traj.t[k])), int(traj.mode[k]), int(traj.is_post_jump[k])] + u + ws)


def write_plot_script(path, csv_name, n, title):
    cols = "\n".join(
        f"plot '{csv_name}' using 1:{4 + i} with lines title 'u{i + 1}'" for i in range(n)
    )
    text = f"""# gnuplot script; run with: gnuplot -p {os.path.basename(path)}
set datafile separator ','
set key autotitle columnhead
set title '{title}'
set xlabel 't [s]'
set multiplot layout {n + 2},1
{cols}
plot '{csv_name}' using 1:{4 + n} with lines title 'W_s', '' using 1:{5 + n} with lines title 'W_f'
set xlabel 'u1'
set ylabel 'u2'
plot '{csv_name}' using 4:5 with lines title 'phase plane'
unset multiplot
"""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def run_simulation(spec, schedule, x0, sample_dt, analysis=None, out_dir=None, stem="trajectory"):
    """Simulate the original system; add witnesses when Lyapunov data fits."""
    traj = simulate(LinearHybridSystem.from_spec(spec), schedule, sample_dt, x0)
    if analysis is not None and not analysis.augmented:
        witnesses(traj, analysis.lyap, analysis.decoupled)
    verdict = classify(traj)
    if out_dir is not None:
        csv_name = f"{stem}.csv"
        write_trajectory_csv(os.path.join(out_dir, csv_name), traj)
        write_plot_script(os.path.join(out_dir, f"{stem}.gp"), csv_name, traj.states.shape[1], f"{stem}: {verdict}")
    return traj, verdict


def cmd_simulate(args):
    cfg = RunConfig.load(args.config)
    spec = cfg.system if args.eps is None else cfg.system.with_epsilon(args.eps)
    try:
        an = analyze(spec, method=cfg.method, kappa=cfg.kappa, overrides=cfg.overrides or None, strict_b3=cfg.strict_b3)
    except DomainError:
        an = None
    horizon = args.horizon or cfg.horizon or (HORIZON_PER_RATE / an.lyap.lam_s if an else DEFAULT_HORIZON)
    if args.tau is not None:
        sched_cfg = {"kind": "periodic", "tau": args.tau}
    elif args.schedule is not None:
        try:
            with open(args.schedule, encoding="utf-8") as fh:
                sched_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read schedule file: {exc}") from exc
    elif cfg.schedule is not None:
        sched_cfg = cfg.schedule
    else:
        raise UsageError("give --tau, --schedule or a schedule in the config")
    model.check(spec)
    schedule = build_schedule(sched_cfg, spec.transitions, horizon)
    x0 = cfg.x0 if cfg.x0 is not None else [1.0] * spec.modes[int(schedule.modes[0])].n
    sample_dt = args.sample_dt or cfg.sample_dt or horizon / SAMPLES_PER_RUN
    out = _out_dir(args, cfg)
    traj, verdict = run_simulation(spec, schedule, x0, sample_dt, an, out)
    print(f"classification: {verdict}")
    print(f"samples: {len(traj)}  events: {len(schedule) - 1}  horizon: {_fmt(horizon)}  "
          f"final |X|/|X0|: {_fmt(float(traj.norms[-1] / traj.norms[0]) if traj.norms[0] else 0.0)}")
    print(f"wrote {os.path.join(out, 'trajectory.csv')} and trajectory.gp")
    return 0


# ------------------------------------------------------------------ sweep


def asymptote(case, eps, lam_f):
    """Reference scale of the bound: ``eps``, or ``-eps ln(eps) / lam_f`` when gamma11 == 1 and gamma12 != 0."""
    if case is CaseLabel.EQ1_G12NZ:
        return -eps * math.log(eps) / lam_f
    return eps


def sweep_rows(lyap, eps_list, workers=None):
    with ThreadPoolExecutor(max_workers=workers) as ex:
        certs = list(ex.map(lambda e: certify(lyap, e), eps_list))
    rows = []
    for c in certs:
        base = c.tau_closed_form
        if base is not None and c.constant_part is not None:
            base = base - c.constant_part
        scale = asymptote(c.case, c.epsilon, lyap.lam_f)
        rows.append({
            "epsilon": c.epsilon,
            "case": str(c.case),
            "tau_closed_form": c.tau_closed_form,
            "tau_bisection": c.tau_bisection,
            "constant_part": c.constant_part,
            "residual": base,
            "ratio": None if base is None else base / scale,
        })
    return rows


def cmd_sweep(args):
    cfg = RunConfig.load(args.config)
    if not args.eps:
        raise UsageError("--eps needs at least one value")
    an = _analysis(cfg)
    rows = sweep_rows(an.lyap, args.eps)
    keys = list(rows[0])
    print("  ".join(f"{k:>15s}" for k in keys))
    for r in rows:
        print("  ".join(f"{_fmt(r[k]):>15s}" for k in keys))
    out = _out_dir(args, cfg)
    path = os.path.join(out, "sweep.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys)
        for r in rows:
            w.writerow(["" if r[k] is None else (repr(r[k]) if isinstance(r[k], float) else r[k]) for k in keys])
    print(f"wrote {path}")
    return 0


# ------------------------------------------------------------------ reproduce


REPRODUCE_HORIZON = 40.0
REPRODUCE_SWEEP = (1e-2, 1e-3, 1e-4)


def reproduce(example_id, out):
    """Run the full analysis of a bundled example and write all artefacts to ``out``."""
    spec = reference_examples.example_spec(example_id)
    cfg = RunConfig(
        system=spec, eps=[reference_examples.EPSILON], method="scalar_optimal_q",
        x0=list(reference_examples.X0), horizon=REPRODUCE_HORIZON,
    )
    with open(os.path.join(out, "config.json"), "w", encoding="utf-8") as fh:
        fh.write(cfg.dumps() + "\n")
    findings = validation_findings(spec)
    an = analyze(spec, method="scalar_optimal_q")
    L = an.lyap
    cert = certify(L, spec.epsilon)
    with open(os.path.join(out, "certificate.json"), "w", encoding="utf-8") as fh:
        json.dump(cert.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    rows = sweep_rows(L, REPRODUCE_SWEEP)
    sims = []
    for tau, expected in reference_examples.SIMULATIONS[example_id]:
        sched = model.periodic_schedule(spec.transitions, tau, REPRODUCE_HORIZON)
        dt = max(tau, REPRODUCE_HORIZON / SAMPLES_PER_RUN)
        stem = f"trajectory_tau_{tau:g}"
        traj, verdict = run_simulation(spec, sched, reference_examples.X0, dt, an, out, stem=stem)
        sims.append((tau, expected, str(verdict), float(traj.norms[-1] / traj.norms[0])))

    ref = reference_examples.REFERENCE[example_id]
    lines = [f"# Example {example_id}", ""]
    lines.append(f"validation findings: {len(findings)}")
    lines.append("")
    lines.append("| quantity | reference | computed |")
    lines.append("|---|---|---|")
    lines.append(f"| gamma11 | {ref['gamma11']:.6g} | {L.gamma11:.6g} |")
    lines.append(f"| lambda_s | {ref['lam_s']:.6g} | {L.lam_s:.6g} |")
    lines.append(f"| lambda_f | {ref['lam_f']:.6g} | {L.lam_f:.6g} |")
    if "constant_part" in ref:
        lines.append(f"| ln(gamma11)/lambda_s | {ref['constant_part']:.2f} | {cert.reduced_order_tau:.6g} |")
    lines.append(f"| dwell-time at eps=1e-3 | {ref['tau_closed_form']:.6g} | closed form {_fmt(cert.tau_closed_form)}, bisection {_fmt(cert.tau_bisection)} |")
    lines.append(f"| case | | {cert.case} |")
    lines.append("")
    lines.append("## Sweep")
    lines.append("")
    lines.append("| epsilon | tau_closed_form | tau_bisection | residual/scale |")
    lines.append("|---|---|---|---|")
    for r in rows:
        lines.append(f"| {r['epsilon']:g} | {_fmt(r['tau_closed_form'])} | {_fmt(r['tau_bisection'])} | {_fmt(r['ratio'])} |")
    lines.append("")
    lines.append("## Simulations (X0 = (2, 1), horizon 40 s)")
    lines.append("")
    lines.append("| tau | expected | classification | final |X|/|X0| |")
    lines.append("|---|---|---|---|")
    for tau, exp, got, ratio in sims:
        lines.append(f"| {tau:g} | {exp} | {got} | {ratio:.3g} |")
    text = "\n".join(lines) + "\n"
    with open(os.path.join(out, "summary.md"), "w", encoding="utf-8") as fh:
        fh.write(text)
    return text, sims


def cmd_reproduce(args):
    out = _out_dir(args)
    text, sims = reproduce(args.example, out)
    print(text)
    print(f"wrote artefacts to {out}")
    return 0 if all(exp == got for _, exp, got, _ in sims) else 1


# ------------------------------------------------------------------ main


def build_parser():
    p = argparse.ArgumentParser(prog="sphybrid", description="Dwell-time certificates for singularly perturbed linear hybrid systems.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a system description")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)

    c = sub.add_parser("certify", help="compute dwell-time certificates")
    c.add_argument("config")
    c.add_argument("--eps", type=float, nargs="+")
    c.add_argument("--strict-b3", action="store_true", help="use the alternative fast-coupling constant with an extra Qf")
    c.add_argument("--method", choices=("lyapunov", "scalar_optimal_q"))
    c.add_argument("--out")
    c.set_defaults(func=cmd_certify)

    s = sub.add_parser("simulate", help="simulate under a schedule")
    s.add_argument("config")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--tau", type=float, help="periodic dwell-time in seconds")
    g.add_argument("--schedule", help="JSON file with a schedule object")
    s.add_argument("--eps", type=float)
    s.add_argument("--horizon", type=float)
    s.add_argument("--sample-dt", type=float)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="certificates over a list of epsilon values")
    w.add_argument("config")
    w.add_argument("--eps", type=float, nargs="*", default=None)
    w.add_argument("--out")
    w.set_defaults(func=cmd_sweep)

    r = sub.add_parser("reproduce", help="full report for bundled example 1 or 2")
    r.add_argument("example", type=int, choices=(1, 2))
    r.add_argument("--out")
    r.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SphybridError as exc:  # pragma: no cover - every error is one of the above
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
