"""Command-line front end.

Every subcommand produces a JSON verification report (per-check pass/fail
with measured values).  Commands with a CSV/text artifact write it to
``--out``; without ``--out`` the artifact goes to stdout and the report to
stderr.  Otherwise the report goes to stdout.  Settings come
from, in decreasing priority: command-line flags, ``NLSBEAT_<KEY>``
environment variables, a flat ``key = value`` config file, built-in defaults.

Exit status: 0 when every check passes, 1 when a check fails, 2 for usage or
configuration errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

ENV_PREFIX = "NLSBEAT_"


class ConfigError(ValueError):
    pass


def _floats(text: str, n: int | None = None) -> tuple:
    try:
        vals = tuple(float(x) for x in str(text).replace(" ", "").split(",") if x != "")
    except ValueError as exc:
        raise ConfigError(f"not a list of numbers: {text!r}") from exc
    if n is not None and len(vals) != n:
        raise ConfigError(f"expected {n} numbers, got {len(vals)} in {text!r}")
    return vals


def _ints(text: str) -> tuple:
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise ConfigError(f"expected integers: {text!r}")
    return tuple(int(v) for v in vals)


@dataclass
class RunConfig:
    """Flat run settings; every key has a default and a validated range."""

    eps: float = 1e-3
    gamma: float = 0.05
    tau: float = 5.0
    k0: int = 8
    steps: int = 3
    samples: int = 10_000
    seed: int = 0
    mode_cut: int = 8
    J: int = 16
    T: float = 100.0
    dt: float = 2 * math.pi / 2048
    stride: int = 64
    xi: tuple = (0.6, 4.0, 0.0, 2.0)
    domain: tuple = (0.004, 0.012, 3.9, 4.1, -0.1, 0.1, 1.9, 2.1)
    residual_tol: float = 1e-12
    conservation_tol: float = 1e-8
    cache: str = "spectra_grid.npz"

    _PARSERS = {
        "xi": lambda s: _floats(s, 4),
        "domain": lambda s: _floats(s, 8),
    }

    def validate(self) -> "RunConfig":
        checks = [
            (0 < self.eps <= 0.1, "eps must lie in (0, 0.1]"),
            (self.gamma > 0, "gamma must be positive"),
            (self.tau > 0, "tau must be positive"),
            (1 <= self.k0 <= 512, "k0 must lie in [1, 512]"),
            (1 <= self.steps <= 6, "steps must lie in [1, 6]"),
            (self.samples >= 1, "samples must be positive"),
            (self.seed >= 0, "seed must be non-negative"),
            (0 <= self.mode_cut <= 16, "mode_cut must lie in [0, 16]"),
            (2 <= self.J <= 32, "J must lie in [2, 32]"),
            (self.T >= 0, "T must be non-negative"),
            (self.dt > 0, "dt must be positive"),
            (self.stride >= 1, "stride must be positive"),
            (self.residual_tol > 0 and self.conservation_tol > 0, "tolerances must be positive"),
            (len(self.xi) == 4 and self.xi[0] >= 0, "xi needs four entries with E >= 0"),
            (all(self.domain[2 * i] < self.domain[2 * i + 1] for i in range(4)),
             "domain needs lo < hi on each axis"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        return self

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def update(self, mapping: dict, source: str) -> None:
        types = {f.name: f.type for f in fields(self)}
        for key, raw in mapping.items():
            if key not in types:
                raise ConfigError(f"unknown config key {key!r} in {source}")
            setattr(self, key, self._coerce(key, raw))

    def _coerce(self, key, raw):
        if not isinstance(raw, str):
            return raw
        if key in self._PARSERS:
            return self._PARSERS[key](raw)
        current = getattr(type(self), key)
        try:
            if isinstance(current, bool):
                return raw.lower() in ("1", "true", "yes")
            if isinstance(current, int):
                return int(raw)
            if isinstance(current, float):
                return float(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
        return raw


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{source}:{n}: expected 'key = value'")
        out[key.strip()] = value.strip()
    return out


def load_config(path: str | None = None, env: dict | None = None,
                overrides: dict | None = None) -> RunConfig:
    cfg = RunConfig()
    if path:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        cfg.update(parse_config_text(text, path), path)
    env = os.environ if env is None else env
    from_env = {k[len(ENV_PREFIX):].lower(): v for k, v in env.items()
                if k.startswith(ENV_PREFIX)}
    # J and T keep their case
    from_env = {("J" if k == "j" else "T" if k == "t" else k): v for k, v in from_env.items()}
    cfg.update(from_env, "environment")
    cfg.update({k: v for k, v in (overrides or {}).items() if v is not None}, "flags")
    return cfg.validate()


# ---------------------------------------------------------------------------
# output helpers

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _check(name: str, ok, **measured) -> dict:
    return {"check": name, "pass": bool(ok), **measured}


class Streams:
    def __init__(self, out, err):
        self.out, self.err = out, err


def _emit(report: dict, out: str | None, artifact: str | None, io_: Streams) -> int:
    checks = report.get("checks", [])
    report["all_pass"] = all(c["pass"] for c in checks)
    report_stream = io_.out
    if artifact is None and out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(dump_json(report))
    elif artifact is not None:
        if out:
            Path(out).parent.mkdir(parents=True, exist_ok=True)
            Path(out).write_text(artifact)
            report["artifact"] = str(out)
        else:
            io_.out.write(artifact)
            report_stream = io_.err
    report_stream.write(dump_json(report))
    return 0 if report["all_pass"] else 1


# ---------------------------------------------------------------------------
# subcommands

def cmd_resonances(args, cfg, io_: Streams) -> int:
    from . import modes
    box = args.box if args.box is not None else 4
    if args.set:
        S = modes.tangential_set(_ints(args.set))
        found = modes.enumerate_resonances(box, inside=S, n_inside=args.n_inside,
                                           nontrivial_only=not args.include_trivial)
    else:
        S = None
        found = modes.enumerate_resonances(box, nontrivial_only=args.nontrivial_only)
    rows = [s.j for s in found]
    checks = [_check("all resonant", all(modes.is_resonant(s) for s in found), count=len(found))]
    if S is not None:
        checks.append(_check("set complete", modes.is_complete(S), set=list(S)))
    report = {"command": "resonances", "box": box, "count": len(found),
              "sextuples": [str(s) for s in found], "checks": checks}
    artifact = csv_text(["j1", "j2", "j3", "j4", "j5", "j6"], rows)
    return _emit(report, args.out, artifact, io_)


def cmd_birkhoff(args, cfg, io_: Streams) -> int:
    from . import birkhoff
    from .algebra import NormParams, majorant_norm
    rep = birkhoff.verification_report(cfg.mode_cut, cfg.eps)
    H = birkhoff.TruncatedNlsHamiltonian.build(cfg.mode_cut, cfg.eps)
    res = birkhoff.normal_form_step(H)
    checks = [_check(c["check"], c["pass"], expected=c["expected"], measured=c["measured"])
              for c in rep["checks"]]
    report = {"command": "birkhoff", "mode_cut": cfg.mode_cut, "eps": cfg.eps,
              "terms": rep["terms"], "checks": checks}
    if res.remainder is not None:
        # degree-10 remainder, majorant norm at s = r = 1/2
        report["remainder"] = {"terms": len(res.remainder),
                               "majorant_norm": majorant_norm(res.remainder, NormParams(0.5, 0.5))}
    return _emit(report, args.out, res.HBirk.to_text(), io_)


def cmd_pendulum(args, cfg, io_: Streams) -> int:
    from . import pendulum as pend
    K = np.array(_floats(args.K, 3)) if args.K else np.array(cfg.xi[1:])
    E = args.E if args.E is not None else cfg.xi[0]
    fp = pend.fixed_points(K)
    p1, p2 = pend.separatrix_crossings(K)
    tw = pend.twist_matrix(K)
    report = {"command": "pendulum", "K": K.tolist(), "stable_point": fp.stable,
              "saddle": fp.unstable, "separatrix_energy": pend.separatrix_energy(K),
              "separatrix_action": pend.separatrix_action(K),
              "separatrix_crossings": [p1, p2], "twist_det": tw.det, "gamma22": tw.gamma22}
    checks = [_check("crossings bracket the stable point", p1 < fp.stable < p2, p1=p1, p2=p2)]
    if E > 0:
        aa = pend.action_angle_data([E, *K], n_grid=64)
        report.update(action=E, energy=aa.energy, period=aa.period,
                      p_range=[float(aa.p.min()), float(aa.p.max())])
    freq = pend.frequency_map([E, *K], n_grid=128, gradient="average")
    report["lambda"] = freq.lam.tolist()
    report["f0"] = freq.f0
    if np.allclose(K, (4.0, 0.0, 2.0)):
        checks += [
            _check("stable point p = 1", abs(fp.stable - 1) < 1e-12, value=fp.stable),
            _check("saddle p = 1", abs(fp.unstable - 1) < 1e-12, value=fp.unstable),
            _check("p1 + p2 = 2", abs(p1 + p2 - 2) < 1e-10, value=p1 + p2),
            _check("p1 < 1/2 < 3/2 < p2", p1 < 0.5 and p2 > 1.5),
        ]
    artifact = None
    if args.phase_portrait:
        qs, ps, grid, orbits = pend.phase_portrait(K, n=args.phase_portrait)
        rows = [("grid", -1, q, p, grid[i, k]) for i, p in enumerate(ps) for k, q in enumerate(qs)]
        for n, (_, p, q) in enumerate(orbits):
            rows += [("orbit", n, qq, pp, pend.h(pp, qq, K)) for pp, qq in zip(p, q)]
        artifact = csv_text(["kind", "orbit", "q", "p", "h"], rows)
    return _emit(report, args.out, artifact, io_)


def cmd_floquet(args, cfg, io_: Streams) -> int:
    from . import floquet as flq
    xi = _floats(args.xi, 4) if args.xi else cfg.xi
    res = flq.floquet_exponents(args.j, xi)
    unit = float(np.max(np.abs(res.monodromy.m @ res.monodromy.m.conj().T - np.eye(2))))
    per = flq.periodicity_residual(args.j, xi, res)
    B = res.B.m
    report = {"command": "floquet", "xi": list(xi), "j": args.j,
              "theta_plus": res.theta_plus, "theta_minus": res.theta_minus,
              "period": res.period, "branch_flag": res.branch_flag,
              "B": {"re": B.real.tolist(), "im": B.imag.tolist()},
              "checks": [_check("monodromy unitary", unit < 1e-10, residual=unit),
                         _check("log reproduces monodromy", res.periodicity_residual < 1e-8,
                                residual=res.periodicity_residual),
                         _check("Floquet factor periodic", per < 1e-8, residual=per)]}
    return _emit(report, args.out, None, io_)


def _grid(cfg, path):
    from . import melnikov as mk
    d = cfg.domain
    return mk.cached_grid(path or cfg.cache, tuple((d[2 * i], d[2 * i + 1]) for i in range(4)))


def cmd_melnikov(args, cfg, io_: Streams) -> int:
    from . import melnikov as mk
    if args.action == "verify-star":
        rep = mk.verify_star_nonresonance(args.ell_bound, args.mode_bound)
        body = rep.as_dict()
        checks = [_check(f"case {v.case}: {v.description}", not v.integral,
                         parameter=v.parameter, obstruction=v.obstruction)
                  for v in rep.verdicts]
        checks.append(_check("brute force: no identical zero", not rep.hits,
                             searched=rep.searched, twist_covered=len(rep.twist_covered)))
        report = {"command": "melnikov verify-star", **body, "checks": checks}
        return _emit(report, args.out, None, io_)
    gammas = _floats(args.gamma) if args.gamma else (cfg.gamma,)
    grid = _grid(cfg, args.cache)
    results = mk.measure_sweep(gammas, cfg.eps, cfg.tau, cfg.k0, cfg.steps, cfg.samples,
                               grid=grid, seed=cfg.seed, method=args.method)
    rows = []
    for r in results:
        cum = 0.0
        for m, f in enumerate(r.per_step):
            cum += f
            rows.append((r.gamma, m, f, cum))
    fr = [r.excised_fraction for r in results]
    checks = [_check("fractions in [0, 1]", all(0 <= f <= 1 for f in fr), fractions=fr)]
    if len(results) > 1 and min(fr) > 0:
        ratios = [(b / a) / (gb / ga) for a, b, ga, gb in
                  zip(fr, fr[1:], gammas, gammas[1:])]
        checks.append(_check("linear in gamma within a factor 3",
                             all(1 / 3 <= q <= 3 for q in ratios), ratios=ratios))
    report = {"command": "melnikov measure", "eps": cfg.eps, "tau": cfg.tau, "k0": cfg.k0,
              "steps": cfg.steps, "samples": cfg.samples, "seed": cfg.seed,
              "method": args.method,
              "results": [{"gamma": r.gamma, "fraction": r.excised_fraction,
                           "per_step": r.per_step} for r in results],
              "checks": checks}
    artifact = csv_text(["gamma", "step", "fraction", "cumulative"], rows)
    return _emit(report, args.out, artifact, io_)


def cmd_kam(args, cfg, io_: Streams) -> int:
    from . import kam
    from . import melnikov as mk
    xi = _floats(args.xi, 4) if args.xi else cfg.xi
    spectra_xi = mk.spectra_at(xi)
    N, Prg, Ppos = kam.birkhoff_seed(spectra_xi, xi, cfg.eps)
    st0 = kam.initial_state(N, Prg, Ppos, k0=cfg.k0, eps=cfg.eps)
    states = kam.kam_iterate(st0, cfg.steps, spectra_xi, cfg.gamma, cfg.eps, cfg.tau)
    excised = [mk.excision_test(xi, m, cfg.gamma, cfg.eps, cfg.tau, cfg.k0, spectra=spectra_xi)
               for m in range(cfg.steps)]
    per_step = []
    for st in states:
        d = {k: v for k, v in st.diagnostics.items() if k not in ("ref_keys",)}
        per_step.append({"m": st.m, "s": st.s, "r": st.r, "K": st.K,
                         "bounds": dict(zip(("M", "L", "alpha", "R"), st.bounds.as_tuple())),
                         **d})
    resid = max(st.diagnostics.get("residual", 0.0) for st in states)
    ratios = kam.log_ratios(states)
    report = {"command": "kam", "xi": list(xi), "eps": cfg.eps, "gamma": cfg.gamma,
              "tau": cfg.tau, "k0": cfg.k0, "steps": per_step, "log_ratios": ratios,
              "telescopic": kam.telescopic(states),
              "checks": [_check("homological residual", resid < cfg.residual_tol, value=resid),
                         _check("xi passes the excision tests", all(excised), steps=excised),
                         _check("telescopic bounds", kam.telescopic(states))]}
    return _emit(report, args.out, None, io_)


def cmd_simulate(args, cfg, io_: Streams) -> int:
    from . import TANGENTIAL
    from . import galerkin as gal
    xi = _floats(args.xi, 4) if args.xi else cfg.xi
    state = gal.initial_data(xi, cfg.eps, cfg.J, args.phi0)
    traj = gal.integrate(state, cfg.dt, cfg.T, args.scheme, cfg.stride)
    f = gal.mode_energies(traj)
    header = ["t"] + [f"{p}_{j}" for j in TANGENTIAL for p in ("re", "im")]
    header += [f"f_{j}" for j in TANGENTIAL] + ["L", "M", "H"]
    rows = []
    for n, t in enumerate(traj.t):
        row = [t]
        for j in TANGENTIAL:
            row += [traj.mode(j)[n].real, traj.mode(j)[n].imag]
        row += [f[j][n] for j in TANGENTIAL] + [traj.L[n], traj.M[n], traj.H[n]]
        rows.append(row)
    drift = traj.drift()
    report = {"command": "simulate", "xi": list(xi), "eps": cfg.eps, "J": cfg.J, "T": cfg.T,
              "dt": cfg.dt, "scheme": args.scheme, "drift": drift,
              "checks": [_check("mass conserved", drift["L"] < cfg.conservation_tol,
                                value=drift["L"]),
                         _check("momentum conserved", drift["M"] < cfg.conservation_tol,
                                value=drift["M"])]}
    try:
        diag = gal.diagnostics(traj, xi, args.phi0)
        report["beating"] = diag.as_dict()
    except ValueError as exc:
        report["beating"] = {"skipped": str(exc)}
    artifact = csv_text(header, rows)
    return _emit(report, args.out or None, artifact, io_)


COMMANDS = {
    "resonances": cmd_resonances,
    "birkhoff": cmd_birkhoff,
    "pendulum": cmd_pendulum,
    "floquet": cmd_floquet,
    "melnikov": cmd_melnikov,
    "kam": cmd_kam,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nlsbeat", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="flat 'key = value' config file")
    sub = ap.add_subparsers(dest="command", metavar="command")

    def common(p, *keys):
        for k in keys:
            flag = "--" + k.replace("_", "-")
            typ = {"k0": int, "steps": int, "samples": int, "seed": int, "mode_cut": int,
                   "J": int, "stride": int}.get(k, float)
            p.add_argument(flag, dest=k, type=typ, default=None)
        p.add_argument("--out", default=None, help="artifact path")

    p = sub.add_parser("resonances", help="resonant sextuples")
    p.add_argument("--box", type=int, default=None)
    p.add_argument("--set", default=None, help="comma-separated tangential set")
    p.add_argument("--n-inside", type=int, default=4)
    p.add_argument("--nontrivial-only", action="store_true")
    p.add_argument("--include-trivial", action="store_true")
    common(p)

    p = sub.add_parser("birkhoff", help="one Birkhoff step with coefficient checks")
    common(p, "mode_cut", "eps")

    p = sub.add_parser("pendulum", help="reduced pendulum data")
    p.add_argument("--K", default=None, help="K1,K2,K3")
    p.add_argument("--E", type=float, default=None, help="action")
    p.add_argument("--phase-portrait", type=int, default=0, metavar="N")
    common(p)

    p = sub.add_parser("floquet", help="Floquet exponents of a ±3/±4 block")
    p.add_argument("--xi", default=None, help="E,K1,K2,K3")
    p.add_argument("--j", type=int, choices=(3, 4), required=True)
    common(p)

    p = sub.add_parser("melnikov", help="non-resonance checks")
    p.add_argument("action", choices=("verify-star", "measure"))
    p.add_argument("--gamma", default=None, help="one or more comma-separated values")
    p.add_argument("--ell-bound", type=int, default=24)
    p.add_argument("--mode-bound", type=int, default=24)
    p.add_argument("--cache", default=None, help="spectra grid path (.npz)")
    p.add_argument("--method", choices=("lines", "points"), default="lines")
    common(p, "eps", "tau", "k0", "steps", "samples", "seed")

    p = sub.add_parser("kam", help="truncated KAM iteration")
    p.add_argument("--xi", default=None)
    common(p, "eps", "gamma", "tau", "k0", "steps")

    p = sub.add_parser("simulate", help="Galerkin integration")
    p.add_argument("--xi", default=None)
    p.add_argument("--phi0", type=float, default=0.0)
    p.add_argument("--scheme", choices=("splitStep", "symplecticImplicit"), default="splitStep")
    common(p, "eps", "J", "T", "dt", "stride")
    return ap


LIST_FLAGS = ("--set", "--xi", "--K", "--gamma")


def _join_list_flags(argv: list[str]) -> list[str]:
    """``--set -2,-1`` → ``--set=-2,-1`` (argparse would read the value as a flag)."""
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        if a in LIST_FLAGS and i + 1 < len(argv) and argv[i + 1][:1] == "-" \
                and argv[i + 1][1:2].isdigit():
            out.append(f"{a}={argv[i + 1]}")
            i += 2
            continue
        out.append(a)
        i += 1
    return out


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    ap = build_parser()
    argv = _join_list_flags(list(sys.argv[1:] if argv is None else argv))
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not args.command:
        ap.print_usage(stderr)
        stderr.write("nlsbeat: error: a command is required\n")
        return 2
    keys = set(RunConfig.keys())
    overrides = {k: v for k, v in vars(args).items() if k in keys and k != "gamma"}
    if args.command != "melnikov" and getattr(args, "gamma", None) is not None:
        overrides["gamma"] = args.gamma
    try:
        cfg = load_config(args.config, overrides=overrides)
        return COMMANDS[args.command](args, cfg, Streams(stdout, stderr))
    except ConfigError as exc:
        ap.print_usage(stderr)
        stderr.write(f"nlsbeat: config error: {exc}\n")
        return 2
    except ValueError as exc:
        stderr.write(f"nlsbeat: error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
