"""
Command-line front end.

    python run.py --action check --config configs/check.ini
    python run.py --action witness --config configs/witness.ini
    python run.py --action verify --target lemma21 --config configs/verify-lemma21.ini
    python run.py --action scaling --config configs/scaling.ini

Exit codes: 0 pass, 1 verdict false or check failed, 2 outside a theorem's
hypothesis range, 3 configuration error, 4 divergence.
"""

import json
import logging
import sys

import numpy as np
import pandas as pd

from frcheck.closed_forms import TestFnSpec
from frcheck.conditions import applicable_theorems, evaluate_theorem, sufficient_theorem
from frcheck.config import EXIT_CODES, OUTPUT_FORMATS, R_GRID, load_run_config, parse_probe_lines, \
    resolve_output_dir, setup_logging
from frcheck.errors import ConfigError, DivergenceSuspected, FrcheckError, MembershipError, RangeGateError
from frcheck.experiments import run_blowup_probe, run_duality, run_scaling, verify_lemma21, verify_remark21
from frcheck.kernels import FRParams, ShiftedPower, SpaceSpec
from frcheck.quadrature import SeparableFunction
from frcheck.reports import save_frame, save_report, scaling_frame
from frcheck.witness import Infeasible, SchurSide, schur_probe_check, witness_solve

logger = logging.getLogger('cli')

ACTIONS = ['check', 'witness', 'verify', 'scaling']
TARGETS = ['lemma21', 'remark21', 'schur', 'duality']

# Largest accepted |fitted - predicted| slope in scaling runs
SLOPE_TOLERANCE = 0.04

CONFIG_HELP = """
config sections (rationals as integers or num/den, pairs comma-separated):
  [params]    n, a, b, c
  [spaces]    p, q, alpha, beta
  [check]     theorem (T1-necessary, T2-sufficient, T3i, ..., T5ii)
  [witness]   variant (L22, L23, L24, L25)
  [testfn]    l (use '-' for an absent numerator), s, R, variant
  [pairing]   l, s, R of the second duality function (defaults to [testfn])
  [lemma21]   n, l, r, s, probes (one 're ; im ; re ; im' line per pair)
  [remark21]  n, s, l, heights
  [schur]     probes (one 're ; im ; re ; im' line per pair), side (p-side, q-side or both)
  [scaling]   r_grid, tolerance, blowup_factor, blowup_epsilon
  [sampling]  seed, base_samples, batch_size, doublings, scale, workers,
              inner_samples, cauchy_tolerance, tail_index_threshold
  [output]    path, format (json or csv)
"""


def _params(config):
    if not config.has("params", "n"):
        raise config.error("params", "n", "missing key 'n' in [params]")
    try:
        return FRParams(
            n=config.integer("params", "n"),
            a=config.rational_pair("params", "a"),
            b=config.rational_pair("params", "b"),
            c=config.rational_pair("params", "c"),
        )
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(str(e), path=config.path)


def _spaces(config):
    try:
        return SpaceSpec(
            p=config.rational_pair("spaces", "p"),
            q=config.rational_pair("spaces", "q"),
            alpha=config.rational_pair("spaces", "alpha"),
            beta=config.rational_pair("spaces", "beta"),
        )
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(str(e), path=config.path)


def _testfn(config, section="testfn"):
    try:
        return TestFnSpec(
            l=config.rational_pair(section, "l", allow_absent=True),
            s=config.rational_pair(section, "s"),
            R=config.real(section, "R", default=1.0),
            variant=config.get(section, "variant", "both-factors").strip(),
        )
    except FrcheckError:
        raise
    except ValueError as e:
        raise ConfigError(str(e), path=config.path)


def _dimension(config, section):
    n = config.integer(section, "n")
    if n is None:
        n = config.integer("params", "n")
    if n is None:
        raise config.error(section, "n", f"missing key 'n' in [{section}] or [params]")
    return n


def _probe_pairs(config, section, n):
    raw = config.get(section, "probes")
    if raw is None:
        raise config.error(section, "probes", f"missing key 'probes' in [{section}]")
    try:
        vectors = parse_probe_lines(raw, n)
    except ValueError as e:
        raise config.error(section, "probes", str(e))
    return [(re1 + 1j * im1, re2 + 1j * im2) for re1, im1, re2, im2 in vectors]


class CommandResult:
    """Outcome of one subcommand: exit code, summary line and report body"""

    def __init__(self, code, summary, payload, frame=None):
        self.code = code
        self.summary = summary
        self.payload = payload
        self.frame = frame


def cmd_check(config):
    """Verdicts of every theorem applicable to the shape of p; exit code follows the queried one"""
    params, spaces = _params(config), _spaces(config)
    queried = config.get("check", "theorem", sufficient_theorem(spaces)).strip()

    verdicts = {}
    for theorem in applicable_theorems(spaces):
        try:
            verdicts[theorem] = evaluate_theorem(theorem, params, spaces).to_dict()
        except RangeGateError as e:
            verdicts[theorem] = {"theorem": theorem, "range_gate": str(e)}

    if queried not in verdicts:
        # A theorem of another family: evaluate it directly so its gate decides
        verdicts[queried] = evaluate_theorem(queried, params, spaces).to_dict()
    result = verdicts[queried]
    if "range_gate" in result:
        raise RangeGateError(result["range_gate"])

    holds = result["holds"]
    failed = [clause["text"] for clause in result["clauses"] if not clause["holds"]]
    summary = f"{queried}: {'holds' if holds else 'fails'}"
    if failed:
        summary += f" ({'; '.join(failed)})"
    payload = {"params": params.to_dict(), "spaces": spaces.to_dict(), "queried": queried, "verdicts": verdicts}
    return CommandResult(EXIT_CODES["pass"] if holds else EXIT_CODES["failed"], summary, payload)


def cmd_witness(config):
    params, spaces = _params(config), _spaces(config)
    variant = config.get("witness", "variant")
    result = witness_solve(params, spaces, variant.strip() if variant else None)
    payload = {"params": params.to_dict(), "spaces": spaces.to_dict(), "witness": result.to_dict()}

    if isinstance(result, Infeasible):
        return CommandResult(EXIT_CODES["failed"], f"{result.variant}: infeasible ({result.reason})", payload)
    payload["identities"] = [{"name": name, "holds": holds} for name, holds in result.identities(params, spaces)]
    summary = (
        f"{result.variant}: r = ({result.r[0]}, {result.r[1]}), s = ({result.s[0]}, {result.s[1]}), "
        f"gamma = ({result.gamma[0]}, {result.gamma[1]})"
    )
    return CommandResult(EXIT_CODES["pass"], summary, payload)


def _verify_code(passed, diverged, valid):
    if passed:
        return EXIT_CODES["pass"]
    if diverged and valid:
        return EXIT_CODES["divergence"]
    return EXIT_CODES["failed"]


def _verify_lemma21(config):
    n = _dimension(config, "lemma21")
    l = config.rational("lemma21", "l", default=0)
    r, s = config.rational("lemma21", "r"), config.rational("lemma21", "s")
    probes = _probe_pairs(config, "lemma21", n)
    report = verify_lemma21(n, l, r, s, probes, config.sampling)
    code = _verify_code(report.passed, report.diverged, report.prediction.valid)
    summary = f"lemma21 (n={n}, l={l}, r={r}, s={s}): {'pass' if report.passed else 'fail'}"
    if report.offending:
        summary += f", offending pairs {report.offending}"
    return CommandResult(code, summary, report.to_dict())


def _verify_remark21(config):
    n = _dimension(config, "remark21")
    s, l = config.rational("remark21", "s"), config.rational("remark21", "l", default=0)
    heights = config.real_list("remark21", "heights", default=[1.0, 2.0])
    report = verify_remark21(n, s, l, heights, config.sampling)
    code = _verify_code(report.passed, report.diverged, report.prediction.valid)
    summary = f"remark21 (n={n}, s={s}, l={l}): {'pass' if report.passed else 'fail'}"
    return CommandResult(code, summary, report.to_dict())


def _verify_schur(config):
    params, spaces = _params(config), _spaces(config)
    witness = witness_solve(params, spaces, config.get("witness", "variant"))
    if isinstance(witness, Infeasible):
        return CommandResult(EXIT_CODES["failed"], f"schur: no witness ({witness.reason})",
                             {"witness": witness.to_dict()})

    probes = _probe_pairs(config, "schur", params.n)
    side = config.get("schur", "side", "both").strip()
    sides = list(SchurSide) if side == "both" else [SchurSide(side)]
    reports = [schur_probe_check(witness, params, spaces, probes, s, config.sampling) for s in sides]
    stable = all(report.stable for report in reports)
    summary = "schur: " + ", ".join(f"{r.side.value} {'stable' if r.stable else 'unstable'}" for r in reports)
    payload = {"witness": witness.to_dict(), "sides": [report.to_dict() for report in reports]}
    return CommandResult(EXIT_CODES["pass"] if stable else EXIT_CODES["failed"], summary, payload)


def _verify_duality(config):
    params, spaces = _params(config), _spaces(config)
    spec = _testfn(config)
    pairing = _testfn(config, "pairing") if config.section("pairing") else spec
    n = params.n
    f, g = (
        SeparableFunction(
            ShiftedPower(n, fn.l[0], fn.s[0], fn.R),
            ShiftedPower(n, fn.l[1], fn.s[1], fn.R),
        )
        for fn in (spec, pairing)
    )
    report = run_duality(params, spaces, f, g, config.sampling)
    code = _verify_code(report.agree, report.diverged, True)
    summary = (
        f"duality: lhs {report.lhs.value:.6g} +- {report.lhs.stderr:.2g}, "
        f"rhs {report.rhs.value:.6g} +- {report.rhs.stderr:.2g}, {'agree' if report.agree else 'disagree'}"
    )
    payload = {"testfn": spec.to_dict(), "pairing": pairing.to_dict(), **report.to_dict()}
    return CommandResult(code, summary, payload)


_VERIFY = {
    "lemma21": _verify_lemma21,
    "remark21": _verify_remark21,
    "schur": _verify_schur,
    "duality": _verify_duality,
}


def cmd_verify(config, target):
    if target not in _VERIFY:
        raise ValueError(f"unknown verify target '{target}'; expected one of {', '.join(TARGETS)}")
    return _VERIFY[target](config)


def cmd_scaling(config):
    params, spaces, spec = _params(config), _spaces(config), _testfn(config)
    grid = config.real_list("scaling", "r_grid", default=list(R_GRID))
    tolerance = config.real("scaling", "tolerance", default=SLOPE_TOLERANCE)

    reports = list(run_scaling(spec, params, spaces, grid, config.sampling))
    if config.has("scaling", "blowup_factor"):
        factor = config.integer("scaling", "blowup_factor")
        epsilon = config.rational("scaling", "blowup_epsilon", default=0)
        reports.append(run_blowup_probe(params, spaces, spec, factor, epsilon, grid, config.sampling))

    diverged = any(report.diverged for report in reports)
    passed = all(report.slope_error < tolerance for report in reports) and not diverged
    summary = "scaling: " + ", ".join(
        f"{r.label} slope {r.fitted_slope:.4f} (predicted {r.predicted_slope})" for r in reports
    )
    payload = {"testfn": spec.to_dict(), "tolerance": tolerance, "reports": [r.to_dict() for r in reports]}
    if passed:
        code = EXIT_CODES["pass"]
    elif diverged:
        code = EXIT_CODES["divergence"]
    else:
        code = EXIT_CODES["failed"]
    return CommandResult(code, summary, payload, frame=scaling_frame(reports))


def _dispatch(action, config, target):
    if action == 'check':
        return cmd_check(config)
    if action == 'witness':
        return cmd_witness(config)
    if action == 'verify':
        if not target:
            raise ConfigError("--target is required for the verify action")
        return cmd_verify(config, target)
    return cmd_scaling(config)


def main(argv=None):
    """Main function for command-line interface"""
    import argparse

    parser = argparse.ArgumentParser(
        description='Forelli-Rudin operator checks on tube domains over the light cone',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=CONFIG_HELP,
    )
    parser.add_argument('--action', choices=ACTIONS, required=True, help='Action to perform')
    parser.add_argument('--target', choices=TARGETS, help='What to verify (required for the verify action)')
    parser.add_argument('--config', required=True, help='INI run configuration')
    parser.add_argument('--output-dir', help='Report directory (overrides [output] path and the environment)')
    parser.add_argument('--format', choices=OUTPUT_FORMATS, help='Report format')
    parser.add_argument('--log-level', default='INFO', help='Logging level')
    parser.add_argument('--log-file', help='Also write diagnostics to this file')
    parser.add_argument('--print', action='store_true', dest='print_report', help='Print the report JSON')

    args = parser.parse_args(argv)
    setup_logging(args.log_level, args.log_file)

    try:
        config = load_run_config(args.config)
        result = _dispatch(args.action, config, args.target)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CODES["parse"]
    except RangeGateError as e:
        logger.error(f"Outside the theorem's hypothesis range: {e}")
        print(f"{args.action}: range gate ({e})")
        return EXIT_CODES["range_gate"]
    except DivergenceSuspected as e:
        logger.error(f"Divergence: {e}")
        print(f"{args.action}: diverged ({e})")
        return EXIT_CODES["divergence"]
    except MembershipError as e:
        logger.error(f"Membership check failed: {e}")
        print(f"{args.action}: failed ({e})")
        return EXIT_CODES["failed"]
    except FrcheckError as e:
        logger.error(f"Check failed: {e}")
        return EXIT_CODES["failed"]
    except ValueError as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_CODES["parse"]

    command = args.action if args.action != 'verify' else f"verify-{args.target}"
    output_dir = resolve_output_dir(config, args.output_dir)
    save_report(command, result.payload, config, output_dir)
    output_format = args.format or config.output_format
    if result.frame is not None:
        save_frame(command, result.frame, config, output_dir)
    elif output_format == 'csv':
        save_frame(command, pd.json_normalize(result.payload, sep="."), config, output_dir)

    if args.print_report:
        print(json.dumps(result.payload, indent=2, default=_json_default))
    print(result.summary)
    return result.code


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"not JSON serialisable: {type(value).__name__}")


if __name__ == "__main__":
    sys.exit(main())
