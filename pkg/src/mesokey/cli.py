"""``mesokey`` command-line front end.

Exit codes: 0 success, 1 validation (bad flags, bad config, verification
abort), 2 numerical failure, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import channel as ch
from . import helstrom, mry
from .distill import key_digest, privacy_amplify, reconcile_and_verify
from .errors import ConfigurationError, MesokeyError, NumericalError
from .protocol import ProtocolSeeds, bits_from_hex, bits_to_hex, distilled_length, run_protocol
from .transcript import write_transcript

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3
HEAVY_PHOTON_NUMBER = 1000.0


def fmt(value: float) -> str:
    return format(float(value), ".12g")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(f"{self.prog}: {message}")


def seed_value(text: str) -> int:
    """Seeds are hex strings (an optional 0x prefix) or decimal integers."""
    text = str(text).strip().lower()
    try:
        if text.startswith("0x"):
            return int(text, 16)
        if any(c in "abcdef" for c in text):
            return int(text, 16)
        return int(text, 10)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a seed: {text!r}") from exc


def load_config(path: str) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _apply_config(parser: argparse.ArgumentParser, sub: argparse.ArgumentParser,
                  argv: list[str]) -> argparse.Namespace:
    pre = _Parser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv[1:])
    if known.config:
        actions = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, value in load_config(known.config).items():
            action = actions.get(key)
            if action is None or key in ("help", "config"):
                raise ConfigurationError(f"unknown config key {key!r}")
            if action.nargs == 0:
                defaults[key] = value.lower() in ("1", "true", "yes", "on")
            else:
                try:
                    defaults[key] = action.type(value) if action.type else value
                except (ValueError, argparse.ArgumentTypeError) as exc:
                    raise ConfigurationError(f"config key {key!r}: {exc}") from exc
                if action.choices is not None and defaults[key] not in action.choices:
                    raise ConfigurationError(f"config key {key!r}: {value!r} not in {action.choices}")
            # a value from the file satisfies a required flag; the command line still wins
            action.required = False
        sub.set_defaults(**defaults)
    return parser.parse_args(argv)


@contextmanager
def _output(path: str | None):
    if path in (None, "-"):
        yield sys.stdout
        return
    try:
        fh = open(path, "w", encoding="utf-8", newline="\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    with fh:
        yield fh


def _m_values(args) -> list[int]:
    if args.m_min < 1:
        raise ConfigurationError("--m-min must be >= 1")
    if args.step < 1:
        raise ConfigurationError("--step must be >= 1")
    if args.m_max < args.m_min:
        raise ConfigurationError("--m-max must be >= --m-min")
    return list(range(args.m_min, args.m_max + 1, args.step))


def _curve(args, with_mi: bool) -> int:
    if not args.n > 0:
        raise ConfigurationError("--n must be positive")
    if args.repetition < 1:
        raise ConfigurationError("--repetition must be >= 1")
    if args.n * args.repetition >= HEAVY_PHOTON_NUMBER and not args.allow_heavy:
        raise ConfigurationError(
            f"effective photon number {args.n * args.repetition:g} needs --allow-heavy")
    curve = helstrom.pe_curve(_m_values(args), args.n, args.repetition, args.eps)
    with _output(args.out) as fh:
        fh.write("M,n,pe,mi\n" if with_mi else "M,n,pe\n")
        for pt in curve.points:
            row = [str(pt.m), fmt(pt.n), fmt(pt.pe)]
            if with_mi:
                row.append(fmt(pt.mi))
            fh.write(",".join(row) + "\n")
    return EXIT_OK


def cmd_pe_curve(args) -> int:
    return _curve(args, with_mi=False)


def cmd_mi_curve(args) -> int:
    return _curve(args, with_mi=True)


def bounds_report(n: float, m: int, repetition: int = 0, rate_ghz: float = 10.0,
                  with_pe: bool = True) -> dict:
    """Masking margin and phase-measurement limits at (n, M), plus the repetition scaling.

    ``repetition=0`` means the overestimated 2*K_M repetition of block ciphering.
    """
    params = mry.SystemParams(n, m)
    limits = mry.phase_limits(n)
    key_bits = max(1, math.ceil(math.log2(m))) if m > 1 else 1
    r = repetition if repetition >= 1 else 2 * key_bits
    m_new = m * math.sqrt(r)
    key_bits_new = math.ceil(math.log2(m_new))
    report = {
        "n": n,
        "M": m,
        "sigma": mry.angle_sigma(n),
        "n_sigma": mry.bases_within_sigma(params),
        "min_spacing": math.pi / m,
        "dphi_sql": limits.sql,
        "dphi_squeezed": limits.squeezed,
        "dphi_heisenberg": limits.heisenberg,
        "dphi_heisenberg_fraction": limits.heisenberg_fraction(m),
        "heisenberg_min_M": mry.heisenberg_min_bases(n),
        "m_gt_sqrt_pi_n": limits.indistinguishable(m),
        "key_bits": key_bits,
        "repetition": r,
        "n_sigma_repeated": mry.bases_within_sigma(mry.SystemParams(n, m, r)),
        "M_new": m_new,
        "key_bits_new": key_bits_new,
        "rate_ghz": rate_ghz,
        "rate_repeated_ghz": rate_ghz / (2 * key_bits),
        "rate_new_ghz": rate_ghz / (2 * key_bits_new),
    }
    if with_pe:
        report["pe"] = helstrom.min_error_probability(params).pe
        report["pe_repeated"] = helstrom.repetition_equivalent_pe(mry.SystemParams(n, m, r)).pe
    return report


def _emit(report: dict, fmt_name: str, fh) -> None:
    if fmt_name == "json":
        fh.write(json.dumps(report, sort_keys=True, indent=2) + "\n")
        return
    for key, value in report.items():
        if isinstance(value, dict):
            for sub, v in value.items():
                fh.write(f"{key}.{sub}: {fmt(v) if isinstance(v, float) else v}\n")
            continue
        if isinstance(value, float):
            value = fmt(value)
        elif isinstance(value, (list, tuple)):
            value = " ".join(fmt(v) if isinstance(v, float) else str(v) for v in value)
        fh.write(f"{key}: {value}\n")


def cmd_bounds(args) -> int:
    if not args.n > 0 or args.m < 1:
        raise ConfigurationError("--n must be positive and --m >= 1")
    report = bounds_report(args.n, args.m, args.repetition, args.rate_ghz, not args.skip_pe)
    _emit(report, args.format, sys.stdout)
    return EXIT_OK


def derive_seeds(master: int, l0: int, k0_hex: str | None):
    """Split one master seed into station, channel, Eve and hash seeds (and K0)."""
    state = np.random.SeedSequence(master).generate_state(6, dtype=np.uint64)
    if k0_hex:
        k0 = bits_from_hex(k0_hex)
        if k0.size != l0:
            raise ConfigurationError(f"--k0 holds {k0.size} bits but --l0 is {l0}")
    else:
        k0 = ch.derived_rng(int(state[5]), 0).integers(0, 2, size=l0, dtype=np.uint8)
    seeds = ProtocolSeeds(k0, int(state[0]), int(state[1]), int(state[2]))
    return seeds, int(state[3]), int(state[4])


def simulate(config: dict) -> tuple[dict, object]:
    """Run the protocol and the chosen eavesdroppers; return (summary, transcript)."""
    params = mry.SystemParams(config["n"], config["m"], config["repetition"], config["transmittance"])
    key_bits = params.key_bits
    l0 = config["l0"]
    if l0 < 1 or l0 % key_bits:
        raise ConfigurationError(f"--l0 {l0} is not a positive multiple of K_M={key_bits}")
    strategies = config["eve"]
    if "keyed" in strategies and not config["reveal_key"]:
        raise ConfigurationError("the keyed eavesdropper needs --reveal-key")
    seeds, channel_seed, eve_seed = derive_seeds(config["seed"], l0, config.get("k0"))
    chan = ch.ShotNoiseChannel(params, channel_seed, config["noiseless"])
    eve_tap = ch.ShotNoiseChannel(params, eve_seed, config["noiseless"])

    transcript = run_protocol(config["cycles"], params, chan, seeds, config["lfsr"],
                              config["check_bits"])
    m = params.num_bases
    errors = {s: 0 for s in strategies}
    total_bits = 0
    for rec in transcript.records:
        true = rec.pulses.true_phase[::params.repetition]
        tapped = eve_tap.transmit(true, rec.cycle_index, observer="eve")
        total_bits += rec.plain_bits.size
        for s in strategies:
            if s == "nearest":
                guess = ch.eve_nearest_level(tapped, m)
            elif s == "map":
                guess = ch.eve_map_guess(tapped, m, params.eve_photon_number)
            else:
                # delay-line copy of exactly what the receiver measured
                guess = ch.eve_keyed_replay(rec.pulses, rec.key_bases, m)
            errors[s] += int(np.count_nonzero(np.atleast_1d(guess) != rec.plain_bits))

    bob_errors = sum(int(np.count_nonzero(r.receiver_bits != r.plain_bits)) for r in transcript.records)
    bob = ch.BerEstimate.from_counts(bob_errors, total_bits)
    floor = helstrom.min_error_probability(params).pe
    eve = {s: ch.BerEstimate.from_counts(e, total_bits) for s, e in errors.items()}
    summary = {
        "M": m, "n": params.mean_photon_number, "r": params.repetition,
        "eta": params.transmittance, "l0": l0, "cycles": len(transcript.records),
        "receiver_ber": [rec.receiver_ber for rec in transcript.records],
        "receiver_ber_pooled": bob.ber,
        "eve_ber": {s: e.ber for s, e in eve.items()},
        "eve_std_error": {s: e.std_error for s, e in eve.items()},
        "helstrom_floor": floor,
        "information_balance": helstrom.information_balance(bob.ber, floor, l0),
        "keys_match": transcript.keys_match,
        "diverged": transcript.diverged,
        "aborted": transcript.aborted,
        "distilled_length": distilled_length(l0, config["ratio"]),
    }
    if transcript.aborted:
        summary["abort_report"] = transcript.abort_report
    return summary, transcript


def cmd_simulate(args) -> int:
    eve = ["nearest", "map"] if args.eve == "all" else [args.eve]
    if args.eve == "all" and args.reveal_key:
        eve.append("keyed")
    config = dict(vars(args), eve=eve)
    summary, transcript = simulate(config)
    if args.transcript:
        with _output(args.transcript) as fh:
            write_transcript(transcript, fh)
    if args.key_out:
        with _output(args.key_out) as fh:
            fh.write(bits_to_hex(transcript.final_key_a) + "\n")
    _emit(summary, args.format, sys.stdout)
    if transcript.aborted:
        print(transcript.abort_report, file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def _read_key(path: str) -> np.ndarray:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read key file {path}: {exc}") from exc
    return bits_from_hex(text)


def cmd_distill(args) -> int:
    key = _read_key(args.key)
    digest = key_digest(key, args.check_bits, args.hash_seed).hex()
    print(f"digest: {digest}")
    status = EXIT_OK
    if args.reference is not None:
        ref = args.reference.strip().lower().removeprefix("0x")
        if ref != digest:
            print(f"mismatch: reference {ref} != {digest}")
            status = EXIT_VALIDATION
        else:
            print("reference digest matches")
    if args.peer:
        result = reconcile_and_verify(key, _read_key(args.peer), args.check_bits, args.hash_seed)
        print(result.report)
        if not result.verified:
            status = EXIT_VALIDATION
    # whole nibbles only, so the output stays a hex key file
    out_len = distilled_length(key.size, args.ratio) // 4 * 4
    amplified = privacy_amplify(key, out_len, args.hash_seed + 1)
    with _output(args.out) as fh:
        fh.write(bits_to_hex(amplified) + "\n")
    print(f"distilled {key.size} -> {out_len} bits")
    return status


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = _Parser(prog="mesokey", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    subs = {}

    for name, func, helptext in (
            ("pe-curve", cmd_pe_curve, "Eve's minimum error probability versus M (CSV M,n,pe)."),
            ("mi-curve", cmd_mi_curve, "Eve's mutual information versus M (CSV M,n,pe,mi).")):
        c = sub.add_parser(name, help=helptext, description=helptext)
        c.add_argument("--n", type=float, required=True, help="mean photon number per bit")
        c.add_argument("--m-min", type=int, default=1, help="smallest M (default 1)")
        c.add_argument("--m-max", type=int, required=True, help="largest M")
        c.add_argument("--step", type=int, default=1, help="M increment (default 1)")
        c.add_argument("--repetition", type=int, default=1, help="pulses per bit r (default 1)")
        c.add_argument("--eps", type=float, default=helstrom.DEFAULT_TAIL_EPSILON,
                       help="Bessel tail tolerance for the truncation")
        c.add_argument("--out", default="-", help="output CSV path, '-' for stdout")
        c.add_argument("--allow-heavy", action="store_true",
                       help="permit effective photon numbers >= 1000")
        c.add_argument("--config", help="key = value file; flags override it")
        c.set_defaults(func=func)
        subs[name] = c

    b = sub.add_parser("bounds", help="Masking margin and phase limits, plus repetition scaling.")
    b.add_argument("--n", type=float, required=True, help="mean photon number per bit")
    b.add_argument("--m", type=int, required=True, help="number of bases M")
    b.add_argument("--repetition", type=int, default=0,
                   help="repetition r for the scaling (default 0: use 2*K_M)")
    b.add_argument("--rate-ghz", type=float, default=10.0, help="raw bit rate in GHz (default 10)")
    b.add_argument("--skip-pe", action="store_true", help="skip the Helstrom computations")
    b.add_argument("--format", choices=("text", "json"), default="text")
    b.add_argument("--config", help="key = value file; flags override it")
    b.set_defaults(func=cmd_bounds)
    subs["bounds"] = b

    s = sub.add_parser("simulate", help="Run the chained protocol with an eavesdropper.")
    s.add_argument("--m", type=int, default=32, help="number of bases M, a power of two (default 32)")
    s.add_argument("--n", type=float, default=100.0, help="mean photon number per bit (default 100)")
    s.add_argument("--l0", type=int, default=1020,
                   help="sequence length L0, a multiple of K_M (default 1020)")
    s.add_argument("--cycles", type=int, default=10, help="number of exchanges (default 10)")
    s.add_argument("--repetition", type=int, default=1, help="pulses per bit r (default 1)")
    s.add_argument("--transmittance", type=float, default=1.0, help="receiver transmittance eta")
    s.add_argument("--seed", type=seed_value, default=0x5EED, help="master seed, hex or decimal")
    s.add_argument("--k0", help="starting key as hex (default: derived from --seed)")
    s.add_argument("--eve", choices=("all", "nearest", "map", "keyed"), default="all",
                   help="eavesdropper strategy (default all)")
    s.add_argument("--reveal-key", action="store_true",
                   help="hand the key to Eve afterwards (enables the keyed replay)")
    s.add_argument("--lfsr", action="store_true", help="cipher bit by bit via the LFSR expansion")
    s.add_argument("--noiseless", action="store_true", help="remove shot noise (n -> infinity)")
    s.add_argument("--check-bits", type=int, default=64, help="digest length for verification")
    s.add_argument("--ratio", type=float, default=0.5, help="privacy amplification ratio")
    s.add_argument("--transcript", help="write the line-delimited transcript here")
    s.add_argument("--key-out", help="write A's final key (hex) here")
    s.add_argument("--format", choices=("text", "json"), default="text")
    s.add_argument("--config", help="key = value file; flags override it")
    s.set_defaults(func=cmd_simulate)
    subs["simulate"] = s

    d = sub.add_parser("distill", help="Verify and privacy-amplify a hex key file.")
    d.add_argument("--key", required=True, help="input key file (hex)")
    d.add_argument("--ratio", type=float, default=0.5, help="output/input length ratio")
    d.add_argument("--hash-seed", type=seed_value, default=0, help="hash seed, hex or decimal")
    d.add_argument("--check-bits", type=int, default=64, help="digest length t")
    d.add_argument("--reference", help="expected digest (hex); mismatch exits 1")
    d.add_argument("--peer", help="second key file to verify against")
    d.add_argument("--out", default="-", help="output key file, '-' for stdout")
    d.add_argument("--config", help="key = value file; flags override it")
    d.set_defaults(func=cmd_distill)
    subs["distill"] = d
    return parser, subs


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    try:
        if argv and argv[0] in subs:
            args = _apply_config(parser, subs[argv[0]], argv)
        else:
            args = parser.parse_args(argv)
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (MesokeyError, ValueError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
