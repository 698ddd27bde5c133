"""
Command-line front end.

    python main.py mult --polys "z1^2,z2^2,z3^2"
    python main.py run --polys "z1^2,z2" --seed 7 --out trace.json
    python main.py verify-trace --in trace.json
    python main.py bound --n 2 --nu 2

Exit codes: 0 success, 1 domain or input errors, 2 resource caps, 3 failed verification.
"""
import argparse
import json
import logging
import os
import sys
from fractions import Fraction
from typing import List, Optional, Sequence

from pydantic import ValidationError

from bounds import bound_report, compare_achieved
from config import env_seed, load_settings
from errors import DimensionError, KohnError, ParseError, ResourceCapError, VerificationError
from kohn import Trace, verify_trace
from localalg import Filtration, complete_basis, radical_membership_power, tuple_multiplicity
from meta import mp2_triangular_resolution, run_to_unit
from models import BasisModel, BoundReportModel, CertificateModel, JobSpec, PolyModel, ResolutionModel
from polyring import INFINITY, Poly, RandomSource, jacobian_det, parse_poly, parse_system, variables
from worked_example import example_section8

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_RESOURCE = 2
EXIT_VERIFICATION = 3

COMMANDS = ["mult", "jacobian", "nullstellensatz", "resolve", "run", "bound", "verify-trace", "example-section8"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kohn", description="Effective Kohn multiplier algorithm on polynomial germs")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--polys", help="comma separated polynomials in z1..zn")
    parser.add_argument("--in", dest="input_path", help="JSON or text input file")
    parser.add_argument("--out", dest="output_path", help="write the result (or the trace for run) here")
    parser.add_argument("--target", help="polynomial g for nullstellensatz")
    parser.add_argument("--n", type=int)
    parser.add_argument("--nu", type=int)
    parser.add_argument("--achieved", help="achieved order p/q to compare with eps(n, nu)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--trials", type=int)
    parser.add_argument("--degree-cap", type=int)
    parser.add_argument("--pair-cap", type=int)
    parser.add_argument("--digit-cap", type=int)
    parser.add_argument("--terminate", action="store_true", help="example-section8: also run to the unit")
    parser.add_argument("--json", dest="json_output", action="store_true", help="JSON only, no tables")
    parser.add_argument("--verbose", action="store_true")
    return parser


def job_from_args(args: argparse.Namespace) -> JobSpec:
    settings = load_settings()
    overrides = {"trials": args.trials, "degree_cap": args.degree_cap, "pair_cap": args.pair_cap,
                 "digit_cap": args.digit_cap}
    caps = settings.caps.model_copy(update={k: v for k, v in overrides.items() if v is not None})
    forced = env_seed()
    seed = forced if forced is not None else args.seed
    return JobSpec(
        command=args.command,
        polys=args.polys,
        input_path=args.input_path,
        output_path=args.output_path,
        target=args.target,
        n=args.n,
        nu=args.nu,
        achieved=args.achieved,
        seed=seed,
        caps=caps,
        json_output=args.json_output,
    )


def load_system(job: JobSpec) -> List[Poly]:
    if job.polys:
        return parse_system(job.polys)
    with open(job.input_path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        return parse_system(text)
    if isinstance(data, dict):
        data = data.get("polys", data.get("premultipliers"))
    if not isinstance(data, list) or not data:
        raise ParseError(f"{job.input_path} holds no polynomial list")
    if all(isinstance(item, str) for item in data):
        return parse_system(",".join(data))
    try:
        polys = [PolyModel.model_validate(item).to_poly() for item in data]
    except ValidationError as e:
        raise ParseError(f"Bad polynomial records in {job.input_path}: {e}")
    if len({p.nvars for p in polys}) != 1:
        raise DimensionError("Polynomials of one system must share a ring")
    return polys


def _multiplicity(value) -> object:
    return "inf" if value == INFINITY else int(value)


def cmd_mult(job: JobSpec, rng: RandomSource) -> dict:
    polys = load_system(job)
    return {"multiplicity": _multiplicity(tuple_multiplicity(polys, rng, caps=job.caps))}


def cmd_jacobian(job: JobSpec, rng: RandomSource) -> dict:
    polys = load_system(job)
    n = polys[0].nvars
    if len(polys) != n:
        raise DimensionError(f"Jacobian needs {n} polynomials in {n} variables, got {len(polys)}", procedure="P1")
    jac = jacobian_det(polys, list(range(1, n + 1)))
    return {"jacobian": jac.to_text(), "multiplicity": _multiplicity(tuple_multiplicity([jac], rng, caps=job.caps))}


def cmd_nullstellensatz(job: JobSpec, rng: RandomSource) -> dict:
    polys = load_system(job)
    n = polys[0].nvars
    target = parse_poly(job.target, n)
    mu = tuple_multiplicity(polys, rng, caps=job.caps)
    r, certificate = radical_membership_power(target, polys, mu, rng=rng, caps=job.caps)
    return {"r": r, "bound": _multiplicity(n * mu), "multiplicity": _multiplicity(mu),
            "basis": BasisModel.from_basis(complete_basis(polys, caps=job.caps)).model_dump(mode="json"),
            "certificate": CertificateModel.from_certificate(certificate).model_dump(mode="json")}


def cmd_resolve(job: JobSpec, rng: RandomSource) -> dict:
    """Triangular resolution of the identity map against the filtration (f_1) ⊆ (f_1, f_2) ⊆ ..."""
    polys = load_system(job)
    n = polys[0].nvars
    filtration = Filtration.from_lists([polys[:j] for j in range(1, len(polys) + 1)])
    resolution = mp2_triangular_resolution(variables(n), filtration, rng, caps=job.caps)
    if not resolution.verify():
        raise VerificationError("Resolution witnesses do not check", procedure="MP2")
    model = ResolutionModel(
        h=[PolyModel.from_poly(h) for h in resolution.h],
        mu=[int(m) for m in resolution.mu],
        lambdas=resolution.lambdas,
        gamma=[PolyModel.from_poly(g) for g in resolution.gamma],
        witnesses=[CertificateModel.from_certificate(w) for w in resolution.witnesses],
    )
    return {"resolution": model.model_dump(mode="json"), "h": [h.to_text("w") for h in resolution.h]}


def cmd_run(job: JobSpec, rng: RandomSource) -> dict:
    polys = load_system(job)
    trace, unit, report = run_to_unit(polys, rng, job.caps)
    if job.output_path:
        _write(job.output_path, trace.to_json())
    result = report.to_dict()
    result["trace_digest"] = trace.digest()
    return result


def cmd_bound(job: JobSpec, rng: RandomSource) -> dict:
    if job.achieved is not None:
        report = compare_achieved(job.n, job.nu, Fraction(job.achieved), job.caps)
    else:
        report = bound_report(job.n, job.nu, job.caps)
    if not job.json_output:
        print(report.to_frame().to_string(index=False), file=sys.stderr)
    model: BoundReportModel = report.to_model()
    return model.model_dump(mode="json")


def cmd_verify_trace(job: JobSpec, rng: RandomSource) -> dict:
    with open(job.input_path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        trace = Trace.from_json(text)
    except (ValidationError, json.JSONDecodeError) as e:
        raise ParseError(f"Bad trace file {job.input_path}: {e}")
    report = verify_trace(trace)
    if not job.json_output:
        print(report.to_frame().to_string(index=False), file=sys.stderr)
    return report.to_dict()


def cmd_example(job: JobSpec, rng: RandomSource, terminate: bool = False) -> dict:
    report = example_section8(rng, job.caps, terminate=terminate)
    if not job.json_output:
        print(report.to_frame().to_string(index=False), file=sys.stderr)
    return report.to_dict()


HANDLERS = {
    "mult": cmd_mult,
    "jacobian": cmd_jacobian,
    "nullstellensatz": cmd_nullstellensatz,
    "resolve": cmd_resolve,
    "run": cmd_run,
    "bound": cmd_bound,
    "verify-trace": cmd_verify_trace,
}


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.write("\n")


def _emit(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, ensure_ascii=False)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.INFO if args.verbose else os.getenv("KOHN_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=level)
    try:
        job = job_from_args(args)
    except ValidationError as e:
        logger.error(f"Invalid invocation: {e}")
        print(_emit({"error": str(e), "exit": EXIT_DOMAIN}))
        return EXIT_DOMAIN

    rng = RandomSource(job.seed)
    logger.info(f"Running {job.command} with seed {job.seed}")
    try:
        if job.command == "example-section8":
            result = cmd_example(job, rng, terminate=args.terminate)
        else:
            result = HANDLERS[job.command](job, rng)
    except VerificationError as e:
        logger.error(f"Verification failed: {e}")
        print(_emit({"error": str(e), "exit": EXIT_VERIFICATION, "node": e.node, "step": e.step}))
        return EXIT_VERIFICATION
    except ResourceCapError as e:
        logger.error(f"Resource cap hit: {e}")
        print(_emit({"error": str(e), "exit": EXIT_RESOURCE}))
        return EXIT_RESOURCE
    except (KohnError, OSError) as e:
        logger.error(f"Error running {job.command}: {e}")
        print(_emit({"error": str(e), "exit": EXIT_DOMAIN}))
        return EXIT_DOMAIN

    output = _emit(result)
    if job.output_path and job.command != "run":
        _write(job.output_path, output)
    print(output)
    failed = result.get("passed") is False or result.get("verdict") == "fail"
    if job.command == "run":
        failed = failed or not result.get("trace_passed", True)
    return EXIT_VERIFICATION if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
