"""Command-line entry point: ``mdiqrng <subcommand> ...``.

Exit codes: 0 success, 2 invalid input, 3 certification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import coherent
from .core import InvalidInput, PovmPair
from .extraction import ExtractorSpec, bits_from_hex, read_bitfile, toeplitz_extract, write_bitfile
from .protocol import (
    FixedPovm,
    HonestLossy,
    PostselectionAttacker,
    ProtocolConfig,
    certify,
    empirical_min_entropy,
    extractable_length,
    run_protocol,
)
from .tomography import TomographyCounts, predicted_frequencies

EXIT_OK, EXIT_INPUT, EXIT_CERT = 0, 2, 3
DEFAULT_EPSILON = 2.0**-100
DEFAULT_REP_RATE = 1e8


class CertificationFailure(Exception):
    """Raised after output is written when nothing could be certified."""


def _flatten(doc, prefix=""):
    out = {}
    for key, val in doc.items():
        name = f"{prefix}{key}"
        if isinstance(val, dict):
            out.update(_flatten(val, name + "."))
        elif isinstance(val, (list, tuple)):
            for i, item in enumerate(val):
                if isinstance(item, dict):
                    out.update(_flatten(item, f"{name}.{i}."))
                else:
                    out[f"{name}.{i}"] = item
        else:
            out[name] = val
    return out


def _csv_text(rows, columns=None) -> str:
    buf = io.StringIO()
    columns = columns or (list(rows[0]) if rows else [])
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def _emit(args, doc=None, rows=None, columns=None):
    if args.format == "json":
        text = json.dumps(doc if doc is not None else rows, indent=2) + "\n"
    else:
        text = _csv_text(rows if rows is not None else [_flatten(doc)], columns)
    out = getattr(args, "output", None)
    if out:
        path = Path(out)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(text)
        tmp.replace(path)
    else:
        sys.stdout.write(text)


def _read_counts(path: str) -> TomographyCounts:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidInput(f"cannot read counts file: {exc}") from exc
    return TomographyCounts.from_json(text)


# ---------------------------------------------------------------- commands


def cmd_tomo(args):
    counts = _read_counts(args.counts)
    freqs = counts.frequencies()
    from .tomography import solve_tomography

    res = solve_tomography(freqs)
    doc = res.to_dict()
    doc["observed"] = freqs.tolist()
    doc["residuals"] = (predicted_frequencies(res.pair) - freqs).tolist()
    _emit(args, doc)


def cmd_rate(args):
    counts = _read_counts(args.counts)
    eps = None if args.asymptotic else args.epsilon
    cert = certify(counts, args.n_gen, eps, args.mu)
    doc = cert.to_dict()
    doc["n_gen"] = args.n_gen
    doc["epsilon"] = eps
    doc["mu"] = args.mu
    if args.mu is not None:
        fr = coherent.photon_fractions(args.mu)
        doc["usable_fraction"] = fr.usable
    length = extractable_length(args.n_gen, cert.bits_per_run, eps or DEFAULT_EPSILON)
    doc["raw_length_rn"] = args.n_gen * cert.bits_per_run
    doc["extractable_length"] = length if cert.bits_per_run > 0 else 0
    _emit(args, doc)
    if cert.bits_per_run <= 0:
        raise CertificationFailure(cert.diagnostic or "zero certified rate")


SWEEP_COLUMNS = ["eta", "eta_db", "mu_star", "bits_per_pulse", "bits_per_second"]


def cmd_sweep(args):
    if args.eta:
        etas = list(args.eta)
    elif args.eta_db:
        etas = [float(x) for x in coherent.db_to_eta(args.eta_db)]
    else:
        if args.points < 0:
            raise InvalidInput("--points must be non-negative")
        etas = [float(x) for x in coherent.db_to_eta(np.linspace(args.eta_db_min, args.eta_db_max, args.points))]
    if any(not 0.0 < e <= 1.0 for e in etas):
        raise InvalidInput("transmittance must lie in (0, 1]")
    reports = coherent.rate_sweep(etas, args.rep_rate, args.no_click, args.observed, args.entropy)
    if args.format == "json":
        _emit(args, rows=[r.to_dict() for r in reports])
    else:
        _emit(args, rows=coherent.sweep_rows(reports), columns=SWEEP_COLUMNS)


def _device_from_args(args, cfg: ProtocolConfig):
    no_click = cfg.no_click_maps_to
    if args.device == "honest":
        eta = cfg.source.eta if cfg.source is not None else args.eta
        return HonestLossy(eta, no_click)
    if args.device == "attacker":
        return PostselectionAttacker.balanced(cfg.n_runs, args.seed, no_click)
    if args.device == "povm":
        doc = json.loads(Path(args.povm).read_text())
        items = doc if isinstance(doc, list) else [doc]
        pairs = [PovmPair.from_weighted(d["a1"], np.asarray(d["n"]) * d["a1"]) for d in items]
        return FixedPovm(tuple(pairs))
    raise InvalidInput(f"unknown device {args.device!r}")


def _protocol_config(args) -> ProtocolConfig:
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidInput(f"bad config file: {exc}") from exc
        return ProtocolConfig.from_dict(doc)
    source = None
    if args.mu is not None:
        source = coherent.SourceModel(args.mu, args.eta, args.rep_rate, args.no_click)
    return ProtocolConfig(
        n_runs=args.n_runs,
        test_fraction=args.test_fraction,
        epsilon=args.epsilon,
        source=source,
        no_click_maps_to=args.no_click,
    )


def cmd_simulate(args):
    cfg = _protocol_config(args)
    device = _device_from_args(args, cfg)
    res = run_protocol(cfg, device, args.seed, args.workers)
    if args.bits_out:
        write_bitfile(args.bits_out, res.generation_bits)
    doc = {"config": cfg.to_dict(), "seed": args.seed, **res.to_dict()}
    _emit(args, doc)
    if res.certified_bits_per_run <= 0:
        raise CertificationFailure(res.diagnostic)


def cmd_attack_demo(args):
    cfg = ProtocolConfig(args.n_runs, test_fraction=args.test_fraction, epsilon=args.epsilon)
    device = PostselectionAttacker.balanced(cfg.n_runs, args.seed)
    res = run_protocol(cfg, device, args.seed)
    bits = res.generation_bits
    p1 = float(bits.mean())
    sigma = math.sqrt(0.25 * 0.75 / bits.size)
    asym = certify(res.counts, bits.size, None)
    doc = {
        "n_runs": cfg.n_runs,
        "n_gen": int(bits.size),
        "ones_fraction": p1,
        "ones_fraction_sigma": sigma,
        "empirical_min_entropy": empirical_min_entropy(bits),
        "reference_min_entropy": math.log2(4.0 / 3.0),
        "tomography": res.certification.tomography.to_dict(),
        "certified_bits_per_run": res.certified_bits_per_run,
        "asymptotic_bits_per_run": asym.bits_per_run,
        "epsilon": cfg.epsilon,
        "extractable_length": res.extractable_length,
    }
    _emit(args, doc)
    if res.certified_bits_per_run <= 0:
        raise CertificationFailure(res.diagnostic)


def cmd_extract(args):
    try:
        raw = read_bitfile(args.input)
    except OSError as exc:
        raise InvalidInput(f"cannot read input: {exc}") from exc
    spec = ExtractorSpec(raw.size, args.output_length)
    if args.seed_hex:
        seed = bits_from_hex(args.seed_hex, spec.seed_length)
    elif args.seed_file:
        seed = read_bitfile(args.seed_file)
    else:
        raise InvalidInput("provide --seed-hex or --seed-file")
    out = toeplitz_extract(raw, seed, spec)
    if args.output:
        write_bitfile(args.output, out)
    else:
        sys.stdout.buffer.write(np.packbits(out, bitorder="big").tobytes())


# ---------------------------------------------------------------- parser


def _positive_int(text):
    val = int(float(text))
    if val < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return val


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mdiqrng", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def fmt(p, default="json"):
        p.add_argument("--format", choices=("json", "csv"), default=default)
        p.add_argument("--output", "-o", help="write here (atomically) instead of stdout")

    p = sub.add_parser("tomo", help="solve tomography from a counts file")
    p.add_argument("counts")
    fmt(p)
    p.set_defaults(func=cmd_tomo)

    p = sub.add_parser("rate", help="certified rate from a counts file")
    p.add_argument("counts")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--asymptotic", action="store_true", help="skip finite-size widening")
    p.add_argument("--n-gen", type=_positive_int, default=10**6)
    p.add_argument("--mu", type=float, default=None)
    fmt(p)
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("sweep", help="optimal coherent-source rate versus loss")
    p.add_argument("--eta-db-min", type=float, default=0.0)
    p.add_argument("--eta-db-max", type=float, default=30.0)
    p.add_argument("--points", type=int, default=16)
    p.add_argument("--eta", type=float, action="append", help="linear transmittance (repeatable)")
    p.add_argument("--eta-db", type=float, action="append", help="loss in dB (repeatable)")
    p.add_argument("--rep-rate", type=float, default=DEFAULT_REP_RATE)
    p.add_argument("--no-click", type=int, choices=(0, 1), default=1)
    p.add_argument("--observed", choices=("worst", "lower", "upper", "midpoint"), default="worst")
    p.add_argument("--entropy", choices=("min", "shannon"), default="min")
    fmt(p, "csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="run the protocol against a simulated device")
    p.add_argument("--config", help="ProtocolConfig JSON; overrides the run flags")
    p.add_argument("--n-runs", type=_positive_int, default=10**6)
    p.add_argument("--test-fraction", type=float, default=0.1)
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--device", choices=("honest", "attacker", "povm"), default="honest")
    p.add_argument("--eta", type=float, default=0.1)
    p.add_argument("--mu", type=float, default=None, help="coherent source intensity")
    p.add_argument("--rep-rate", type=float, default=DEFAULT_REP_RATE)
    p.add_argument("--no-click", type=int, choices=(0, 1), default=0)
    p.add_argument("--povm", help="JSON file with {a1, n} or a list of them")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--bits-out", help="packed bit file for the generation bits")
    fmt(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("attack-demo", help="post-selection attack against the protocol")
    p.add_argument("--n-runs", type=_positive_int, default=10**6)
    p.add_argument("--test-fraction", type=float, default=0.5)
    p.add_argument("--epsilon", type=float, default=1e-10)
    p.add_argument("--seed", type=int, default=0)
    fmt(p)
    p.set_defaults(func=cmd_attack_demo)

    p = sub.add_parser("extract", help="Toeplitz-hash a packed bit file")
    p.add_argument("--input", required=True)
    p.add_argument("--output-length", type=_positive_int, required=True)
    p.add_argument("--seed-hex")
    p.add_argument("--seed-file")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_extract)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        args.func(args)
    except CertificationFailure as exc:
        print(f"certification failed: {exc}", file=sys.stderr)
        return EXIT_CERT
    except (InvalidInput, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
