"""Command-line driver: one subcommand per experiment, each writing a CSV or JSON report.

Exit status is 0 on success, 2 for an invalid configuration and 1 when a
check inside the run fails (the report is still written).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import adversary as adv
from . import ensembles as ens
from . import games as gm
from . import infotheory as it
from . import schemes as sc
from . import serialize
from .core import phi_plus_vector, proj, random_density
from .reports import Report
from .streams import set_threads

ENSEMBLES = ("haar", "clifford", "clifford-orbit", "pauli", "bb84", "file")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def _int_list(text: str) -> list[int]:
    try:
        return [int(float(x)) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _common(p: argparse.ArgumentParser, dim_default: str, samples: int | None = None) -> None:
    p.add_argument("--dim", type=_int_list, default=_int_list(dim_default),
                   help="dimension(s) of the encrypted register, comma-separated where a list makes sense")
    p.add_argument("--ensemble", choices=ENSEMBLES, default=None, help="key distribution")
    p.add_argument("--ensemble-file", default=None, help="JSON ensemble for --ensemble file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=samples)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out", default=None, help="report path (stdout when omitted)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--threads", type=int, default=None, help="worker cap (default: all cores)")
    p.add_argument("--config", default=None, help="JSON file of defaults; flags override it")
    p.add_argument("--timestamp", default=None, help=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uncloneable", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("moments", help="exact vs sampled moments of the projector product T")
    _common(p, "2,4,8", samples=100_000)
    p.add_argument("--n", type=_int_list, default=[1, 2, 3], help="numbers of keys in the product")

    p = sub.add_parser("design-check", help="frame potential and moment-operator test of an ensemble")
    _common(p, "2")
    p.add_argument("--t", type=int, default=2)

    p = sub.add_parser("qecm-check", help="orthogonality and round-trip decryption over keys")
    _common(p, "4", samples=1000)

    p = sub.add_parser("attack", help="see-saw search for a strong cloning attack")
    _common(p, "2")
    p.add_argument("--dB", type=int, default=2)
    p.add_argument("--dC", type=int, default=2)
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--save-attack", default=None, help="write the best attack as JSON")

    p = sub.add_parser("map-attack", help="attack value vs value of the derived game strategy")
    _common(p, "2", samples=20)
    p.add_argument("--dB", type=int, default=2)
    p.add_argument("--dC", type=int, default=2)
    p.add_argument("--attack", default=None, help="JSON attack to map instead of random ones")

    p = sub.add_parser("entropy", help="conditional min-entropy by SDP and by channel search")
    _common(p, "2", samples=20)
    p.add_argument("--dB", type=int, default=2)
    p.add_argument("--state", default=None, help="JSON file holding an encoded density matrix")

    p = sub.add_parser("decouple", help="decoupling inequality on the built-in instance family")
    _common(p, "16", samples=10_000)

    p = sub.add_parser("chain", help="near-eigenstate, inner-product, entropy and proof-step checks")
    _common(p, "4,8,16")
    p.add_argument("--dC", type=int, default=2)
    p.add_argument("--probes", type=int, default=5)
    p.add_argument("--deltas", type=_float_list, default=[0.05, 0.1, 0.2])
    p.add_argument("--rounds", type=int, default=3)

    p = sub.add_parser("bounds", help="closed-form game bound and security parameter tables")
    _common(p, "16,65536,1048576")
    p.add_argument("--lambdas", type=_float_list, default=[8.0, 16.0, 32.0])
    return parser


def parse(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            parser.error(f"cannot read config {args.config}: {e}")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            parser.error(f"unknown config keys: {', '.join(unknown)}")
        for a in sub._actions:
            if a.dest in cfg and a.type is not None and isinstance(cfg[a.dest], (str, int, float)):
                lists = a.type in (_int_list, _float_list)
                try:
                    cfg[a.dest] = a.type(str(cfg[a.dest])) if lists else a.type(cfg[a.dest])
                except (ValueError, argparse.ArgumentTypeError) as e:
                    parser.error(f"config key {a.dest!r}: {e}")
            if a.dest in cfg and a.choices is not None and cfg[a.dest] not in a.choices:
                parser.error(f"config key {a.dest!r} must be one of {sorted(a.choices)}")
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def run_config(args: argparse.Namespace) -> dict:
    skip = {"config", "out", "format", "threads", "timestamp", "save_attack", "report"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _report(args, columns: list[str]) -> Report:
    """New report for this run; kept on ``args`` so a failing run can still be written."""
    args.report = Report(args.command, run_config(args), columns)
    args.report.summary["max_sdp_gap"] = None  # stays null for commands that solve no SDP
    return args.report


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def _ensemble(kind: str | None, d: int, args, default: str) -> ens.UnitaryEnsemble:
    kind = kind or default
    if kind == "file":
        _require(args.ensemble_file is not None, "--ensemble file needs --ensemble-file PATH")
        e = serialize.load_ensemble(args.ensemble_file)
        _require(e.d == d, f"ensemble file has d={e.d}, but --dim is {d}")
        return e
    if kind == "bb84":
        _require(d == 2, "the bb84 ensemble has d = 2")
        return ens.bb84()
    if kind == "haar":
        return ens.haar(d)
    n = int(round(math.log2(d))) if d > 0 else 0
    _require(d >= 2 and 2 ** n == d, f"{kind} ensembles need d a power of two, got {d}")
    if kind == "clifford":
        _require(n <= 2, "the full Clifford group is enumerated for d <= 4; use clifford-orbit above that")
        return ens.clifford_group(n)
    if kind == "clifford-orbit":
        return ens.clifford_orbit(n)
    if kind == "pauli":
        return ens.pauli_group(n)
    raise ConfigError(f"unknown ensemble {kind!r}")


def _default_design(d: int) -> ens.UnitaryEnsemble:
    n = int(round(math.log2(d)))
    return ens.clifford_group(n) if n <= 2 else ens.clifford_orbit(n)


# ---------------------------------------------------------------------------
# commands; each returns (report, ok)
# ---------------------------------------------------------------------------

def cmd_moments(args):
    _require(args.samples and args.samples > 0, "--samples must be positive")
    rep = _report(args, ["n", "d", "outcomes", "ensemble", "method", "samples", "mean_exact", "mean_mc",
                         "mean_stderr", "second_moment_exact", "second_moment_mc", "second_moment_stderr",
                         "agrees"])
    rng = np.random.default_rng(args.seed)
    ok = True
    for d in args.dim:
        _require(d >= 2 and d % 2 == 0, f"d must be even, got {d}")
        e = _ensemble(args.ensemble, d, args, "haar")
        for n in args.n:
            _require(n >= 1, "--n entries must be >= 1")
            r = ens.moment_T_mc(n, d, None, e, args.samples, rng, exhaustive=e.is_exact)
            row = r.as_row()
            row.update(ensemble=e.name, agrees=r.agrees())
            ok &= r.agrees()
            rep.add(row)
    rep.summary["all_agree"] = ok
    return rep, ok


def cmd_design_check(args):
    _require(args.t in (1, 2), "--t must be 1 or 2")
    rep = _report(args, ["ensemble", "d", "size", "t", "frame_potential", "haar_frame_potential",
                         "is_design", "moment_deviation", "projector_moment_deviation"])
    for d in args.dim:
        e = _ensemble(args.ensemble, d, args, "clifford")
        _require(e.is_exact, "design-check needs a finite ensemble")
        fp = ens.frame_potential(e, args.t)
        verdict, dev = ens.is_t_design(e, args.t, tol=args.tol)
        rep.add({"ensemble": e.name, "d": d, "size": e.size, "t": args.t, "frame_potential": fp,
                 "haar_frame_potential": ens.haar_frame_potential(d, args.t), "is_design": verdict,
                 "moment_deviation": dev, "projector_moment_deviation": ens.projector_moment_deviation(e)})
    return rep, True


def cmd_qecm_check(args):
    rep = _report(args, ["ensemble", "d", "keys", "max_overlap", "min_roundtrip", "violations", "structural"])
    rng = np.random.default_rng(args.seed)
    ok = True
    for d in args.dim:
        _require(d >= 2 and d % 2 == 0, f"d must be even, got {d}")
        e = _ensemble(args.ensemble, d, args, "clifford" if d <= 4 else "haar")
        q = sc.Qecm(e, seed=args.seed)
        keys = None if e.is_exact else q.sample_keys(args.samples, rng)
        r = sc.verify_correctness(q, keys, tol=args.tol)
        ok &= r.correct
        rep.add({"ensemble": e.name, "d": d, "keys": r.keys, "max_overlap": r.max_overlap,
                 "min_roundtrip": r.min_roundtrip, "violations": len(r.violations),
                 "structural": ";".join(r.structural)})
    rep.summary["correct"] = ok
    return rep, ok


def cmd_attack(args):
    d = args.dim[0]
    e = _ensemble(args.ensemble, d, args, "bb84" if d == 2 else "clifford")
    _require(e.is_exact, "the see-saw needs a finite ensemble")
    _require(args.restarts >= 1 and args.dB >= 1 and args.dC >= 1, "restarts and dims must be >= 1")
    q = sc.Qecm(e, seed=args.seed)
    trace = adv.seesaw_attack(q, args.dB, args.dC, args.restarts, args.iters,
                              np.random.default_rng(args.seed))
    rep = _report(args, ["restart", "iteration", "step", "value"])
    for r, i, step, v in trace.rows:
        rep.add({"restart": r, "iteration": i, "step": step, "value": v})
    p = gm.game_operator_P(gm.MoeGame(e), *_mapped_povms(q, trace.best_attack))
    monotone = trace.max_decrease() <= 1e-9
    below = trace.best_value <= p.norm + 1e-9
    rep.summary.update(max_sdp_gap=trace.channel_gap, ensemble=e.name, d=d, best_value=trace.best_value,
                       best_restart=trace.best_restart, max_decrease=trace.max_decrease(),
                       channel_sdp_gap=trace.channel_gap,
                       mapped_P_norm=p.norm, coordinated_guess=adv.attack_value(q, adv.coordinated_guess_attack(q)))
    if args.save_attack:
        Path(args.save_attack).write_text(serialize.dumps(serialize.attack_to_dict(q, trace.best_attack)),
                                          encoding="utf-8")
    return rep, monotone and below


def _mapped_povms(q, attack):
    m = gm.attack_to_strategy(q, attack)
    return m.strategy.bob, m.strategy.charlie


def random_attack(q, dB: int, dC: int, rng) -> adv.CloningAttack:
    k = q.ensemble.size
    return adv.CloningAttack(q.d, dB, dC, adv.random_isometry_choi(q.d, dB * dC, rng),
                             gm.random_povms(k, dB, rng), gm.random_povms(k, dC, rng))


def cmd_map_attack(args):
    rng = np.random.default_rng(args.seed)
    rep = _report(args, ["index", "d", "ensemble", "attack_value", "strategy_value", "difference",
                         "conjugated_game", "mapped_P_norm", "bounded"])
    ok = True
    for d in args.dim:
        if args.attack:
            q, atk = serialize.attack_from_dict(Path(args.attack).read_text(encoding="utf-8"))
            attacks = [atk]
        else:
            _require(args.samples and args.samples > 0, "--samples must be positive")
            q = sc.Qecm(_ensemble(args.ensemble, d, args, "clifford"), seed=args.seed)
            _require(q.ensemble.is_exact, "map-attack needs a finite ensemble")
            attacks = [random_attack(q, args.dB, args.dC, rng) for _ in range(args.samples)]
        for i, a in enumerate(attacks):
            m = gm.attack_to_strategy(q, a)
            av = adv.attack_value(q, a)
            sv = gm.winning_probability(m.game, m.strategy)
            pn = gm.game_operator_P(m.game, m.strategy.bob, m.strategy.charlie).norm
            good = abs(av - sv) <= 1e-10 and av <= pn + 1e-10
            ok &= good
            rep.add({"index": i, "d": q.d, "ensemble": q.ensemble.name, "attack_value": av,
                     "strategy_value": sv, "difference": abs(av - sv),
                     "conjugated_game": m.conjugated_game, "mapped_P_norm": pn, "bounded": av <= pn + 1e-10})
        if args.attack:
            break
    rep.summary["all_equal"] = ok
    return rep, ok


def cmd_entropy(args):
    rng = np.random.default_rng(args.seed)
    dA = args.dim[0]
    rep = _report(args, ["case", "dA", "dB", "sdp_lower", "sdp_upper", "sdp_gap", "guess_search", "difference",
                         "von_neumann", "below_von_neumann"])
    cases = []
    if args.state:
        cases.append(("file", serialize.decode_array(json.loads(Path(args.state).read_text(encoding="utf-8"))),
                      dA, args.dB))
    else:
        cases.append(("phi+", proj(phi_plus_vector(dA)), dA, dA))
        cases.append(("mixed-product", np.kron(np.eye(dA) / dA, random_density(args.dB, rng)), dA, args.dB))
        cl = np.zeros((dA * dA, dA * dA))
        for i in range(dA):
            cl[i * dA + i, i * dA + i] = 1 / dA
        cases.append(("classical", cl, dA, dA))
        for i in range(args.samples or 0):
            cases.append((f"random-{i}", random_density(dA * args.dB, rng), dA, args.dB))
    ok = True
    worst = 0.0
    for name, rho, a, b in cases:
        _require(a * b == rho.shape[0], f"state of size {rho.shape[0]} does not split as {a} x {b}")
        h = it.hmin_sdp(rho, a, b)
        k = it.hmin_krs(rho, a, b, restarts=max(args.restarts, 1), rng=rng) if max(a, b) <= 16 else None
        vn = it.conditional_entropy(rho, a, b)
        diff = None if k is None else abs(k.value - h.value)
        worst = max(worst, diff or 0.0)
        below = h.lower <= vn + 1e-9
        ok &= below and (diff is None or diff <= 1e-3)
        rep.add({"case": name, "dA": a, "dB": b, "sdp_lower": h.lower, "sdp_upper": h.upper,
                 "sdp_gap": h.gap, "guess_search": None if k is None else k.value, "difference": diff,
                 "von_neumann": vn, "below_von_neumann": below})
    gaps = [r[rep.columns.index("sdp_gap")] for r in rep.rows]
    rep.summary.update(max_difference=worst, consistent=ok, max_sdp_gap=max(gaps, default=None))
    return rep, ok


def cmd_decouple(args):
    _require(args.samples and args.samples > 0, "--samples must be positive")
    rng = np.random.default_rng(args.seed)
    rep = _report(args, ["instance", "dA", "dE", "a1", "a2", "samples", "lhs_mc", "stderr", "hmin",
                         "hmin_gap", "rhs", "holds", "vacuous"])
    ok = True
    for name, rho, dA, dE in it.decoupling_family(rng):
        r = it.decoupling_check(rho, dA, dE, samples=args.samples, rng=rng, name=name)
        ok &= r.holds
        rep.add({"instance": name, "dA": dA, "dE": dE, "a1": r.a1, "a2": r.a2, "samples": r.samples,
                 "lhs_mc": r.lhs_mc, "stderr": r.stderr, "hmin": r.hmin, "hmin_gap": r.hmin_gap,
                 "rhs": r.rhs, "holds": r.holds, "vacuous": r.vacuous})
    gaps = [r[rep.columns.index("hmin_gap")] for r in rep.rows]
    rep.summary.update(all_hold=ok, max_sdp_gap=max(gaps, default=None))
    return rep, ok


def cmd_chain(args):
    rng = np.random.default_rng(args.seed)
    rep = _report(args, ["d", "ensemble", "check", "probe", "param", "lhs", "rhs", "holds", "vacuous"])
    ok = True
    gaps = {}
    for d in args.dim:
        _require(d >= 4 and 2 ** int(round(math.log2(d))) == d, f"chain needs d a power of two >= 4, got {d}")
        e = _default_design(d) if args.ensemble is None else _ensemble(args.ensemble, d, args, "clifford")
        _require(e.is_exact, "chain needs a finite ensemble")
        r = it.chain_suite(d, e, args.dC, args.probes, args.deltas, rng, args.rounds)
        gaps[str(d)] = r.hmin_gap
        ok &= not r.violations
        for rec in r.records:
            rep.add({"d": d, "ensemble": e.name, "check": rec.check, "probe": rec.probe, "param": rec.param,
                     "lhs": rec.lhs, "rhs": rec.rhs, "holds": rec.holds, "vacuous": rec.vacuous})
    rep.summary.update(all_hold=ok, hmin_sdp_gaps=json.dumps(gaps, sort_keys=True),
                       max_sdp_gap=max(gaps.values(), default=None))
    return rep, ok


def cmd_bounds(args):
    rep = _report(args, ["kind", "x", "value", "bound", "vacuous"])
    try:
        rows = it.bound_table(args.dim, args.lambdas)
    except ValueError as e:
        raise ConfigError(str(e))
    for r in rows:
        rep.add({"kind": r.kind, "x": r.x, "value": r.value, "bound": r.bound, "vacuous": r.vacuous})
    return rep, True


COMMANDS = {
    "moments": cmd_moments, "design-check": cmd_design_check, "qecm-check": cmd_qecm_check,
    "attack": cmd_attack, "map-attack": cmd_map_attack, "entropy": cmd_entropy,
    "decouple": cmd_decouple, "chain": cmd_chain, "bounds": cmd_bounds,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = parse(argv)
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    set_threads(args.threads)
    try:
        rep, ok = COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # keep whatever was computed before the failure
        rep = getattr(args, "report", None)
        print(f"{args.command}: internal failure: {e!r}", file=sys.stderr)
        if rep is not None:
            rep.summary["error"] = repr(e)
            text = rep.write(args.out, args.format, args.timestamp)
            if args.out is None:
                sys.stdout.write(text)
        return 1
    text = rep.write(args.out, args.format, args.timestamp)
    if args.out is None:
        sys.stdout.write(text)
    if not ok:
        print(f"{args.command}: a check failed; see the report", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
