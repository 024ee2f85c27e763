"""Command-line front end: bounds, figure presets, file coding, experiments.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 declared decode
failure (almost-lossless strategy only).  With --json, errors are emitted as
machine-readable JSON on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import bounds, codec, ducompm, harness
from .sources import MEMORYLESS, SourceFamily

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_DECODE_FAILURE = 3


class _CliError(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        self.message = message
        super().__init__(message)


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad flags; remap to the validation code
    def error(self, message):
        raise _CliError(EXIT_VALIDATION, message)


def _read_bytes(path: str) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as e:
        raise _CliError(EXIT_IO, f"cannot read {path}: {e}") from e


def _write_bytes(path: str, data: bytes):
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as e:
        raise _CliError(EXIT_IO, f"cannot write {path}: {e}") from e


def _symbols_from_file(path: str, k: int) -> np.ndarray:
    data = _read_bytes(path)
    symbols = np.frombuffer(data, dtype=np.uint8).astype(np.int64)
    if symbols.size and symbols.max() >= k:
        raise _CliError(
            EXIT_VALIDATION, f"{path} holds symbol {int(symbols.max())} >= alphabet size --k {k}"
        )
    return symbols


def _family(args) -> SourceFamily:
    try:
        return SourceFamily(args.family, args.k)
    except ValueError as e:
        raise _CliError(EXIT_VALIDATION, f"--family/--k: {e}") from e


def _workers(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("UCDIS_THREADS")
    return max(1, int(env)) if env else 1


def cmd_bounds(args) -> int:
    family = _family(args)
    mode = args.mode
    try:
        if args.strategy == "ucomp":
            breakdown = bounds.redundancy_ucomp(family, args.n)
        elif args.strategy == "ucompm":
            if args.m is None:
                raise _CliError(EXIT_VALIDATION, "--m is required for strategy ucompm")
            breakdown = bounds.redundancy_ucompm(family.d, args.n, args.m)
        else:
            if args.m is None:
                raise _CliError(EXIT_VALIDATION, "--m is required for strategy ducompm")
            if args.pe is None:
                raise _CliError(EXIT_VALIDATION, "--pe is required for strategy ducompm")
            breakdown = bounds.redundancy_ducompm(family, args.n, args.m, args.pe, mode)
    except ValueError as e:
        raise _CliError(EXIT_VALIDATION, str(e)) from e
    doc = {
        "strategy": breakdown.strategy,
        "family": family.kind,
        "k": family.k,
        "d": breakdown.d,
        "n": breakdown.n,
        "m": breakdown.m,
        "p_e": breakdown.p_e,
        "mode": mode,
        "terms": breakdown.terms,
        "total_bits": breakdown.total_bits,
        "rate": breakdown.rate,
        "notes": list(breakdown.notes),
    }
    print(json.dumps(doc, indent=2))
    return EXIT_OK


def cmd_figure(args) -> int:
    try:
        table = bounds.figure_preset(args.preset, args.mode)
    except ValueError as e:
        raise _CliError(EXIT_VALIDATION, str(e)) from e
    try:
        with open(args.out, "w") as fh:
            fh.write(table.to_csv())
    except OSError as e:
        raise _CliError(EXIT_IO, f"cannot write {args.out}: {e}") from e
    return EXIT_OK


def cmd_encode(args) -> int:
    family = _family(args)
    x = _symbols_from_file(args.infile, args.k)
    if args.strategy == "ucomp":
        payload = codec.encode_ucomp(family, x)
        m, p_e = 0, 0.0
    elif args.strategy == "ucompm":
        if args.memory is None:
            raise _CliError(EXIT_VALIDATION, "--memory is required for strategy ucompm")
        y = _symbols_from_file(args.memory, args.k)
        payload = codec.encode_ucompm(family, y, x)
        m, p_e = y.size, 0.0
    else:
        if args.memory is not None:
            raise _CliError(
                EXIT_VALIDATION,
                "ducompm encoding must not see the memory sequence; pass --memory-len instead",
            )
        if args.memory_len is None:
            raise _CliError(EXIT_VALIDATION, "--memory-len is required for strategy ducompm")
        if args.pe is None:
            raise _CliError(EXIT_VALIDATION, "--pe is required for strategy ducompm")
        if family.kind != MEMORYLESS:
            raise _CliError(EXIT_VALIDATION, "ducompm supports only --family memoryless")
        try:
            cfg = ducompm.DucompmConfig(
                k=args.k, m=args.memory_len, p_e=args.pe, hash_seed=args.seed
            )
            payload = ducompm.encode_ducompm(x, cfg).payload()
        except (ValueError, ducompm.ResourceLimitError) as e:
            raise _CliError(EXIT_VALIDATION, str(e)) from e
        m, p_e = args.memory_len, args.pe
    container = codec.Container(
        strategy=args.strategy,
        family_kind=family.kind,
        k=args.k,
        n=x.size,
        m=m,
        p_e=p_e,
        payload=payload,
    )
    _write_bytes(args.out, codec.pack_container(container))
    return EXIT_OK


def cmd_decode(args) -> int:
    blob = _read_bytes(args.infile)
    try:
        container = codec.unpack_container(blob)
    except codec.FramingError as e:
        raise _CliError(EXIT_VALIDATION, f"{args.infile}: {e}") from e
    family = SourceFamily(container.family_kind, container.k)
    if container.strategy == "ucomp":
        x = codec.decode_ucomp(family, container.payload, container.n)
    elif container.strategy == "ucompm":
        if args.memory is None:
            raise _CliError(EXIT_VALIDATION, "--memory is required to decode a ucompm container")
        y = _symbols_from_file(args.memory, container.k)
        if y.size != container.m:
            raise _CliError(
                EXIT_VALIDATION,
                f"memory length {y.size} does not match container m={container.m}",
            )
        x = codec.decode_ucompm(family, y, container.payload, container.n)
    else:
        if args.memory is None:
            raise _CliError(EXIT_VALIDATION, "--memory is required to decode a ducompm container")
        y = _symbols_from_file(args.memory, container.k)
        cfg = ducompm.DucompmConfig(
            k=container.k, m=container.m, p_e=container.p_e, hash_seed=args.seed
        )
        try:
            outcome = ducompm.decode_ducompm(container.payload, y, container.n, cfg)
        except codec.FramingError as e:
            raise _CliError(EXIT_VALIDATION, str(e)) from e
        except (ValueError, ducompm.ResourceLimitError) as e:
            raise _CliError(EXIT_VALIDATION, str(e)) from e
        if not outcome.ok:
            raise _CliError(EXIT_DECODE_FAILURE, f"declared decode failure: {outcome.failure_reason}")
        x = outcome.sequence
    _write_bytes(args.out, bytes(np.asarray(x, dtype=np.uint8)))
    return EXIT_OK


_CONFIG_KEYS = {
    "family": "family_kind",
    "k": "k",
    "n": "n",
    "m": "m",
    "p_e": "p_e",
    "strategies": "strategies",
    "trials": "trials",
    "master_seed": "master_seed",
    "theta_mode": "theta_mode",
    "theta": "theta",
    "hash_seed": "hash_seed",
    "inflation": "inflation",
    "collision_budget": "collision_budget",
    "candidate_cap": "candidate_cap",
}


def _load_config(path: str, trials_override) -> harness.ExperimentConfig:
    raw = _read_bytes(path)
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as e:
        raise _CliError(EXIT_VALIDATION, f"{path}: invalid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise _CliError(EXIT_VALIDATION, f"{path}: config must be a JSON object")
    unknown = sorted(set(doc) - set(_CONFIG_KEYS))
    if unknown:
        raise _CliError(EXIT_VALIDATION, f"{path}: unknown config fields: {', '.join(unknown)}")
    kwargs = {_CONFIG_KEYS[key]: value for key, value in doc.items()}
    if "strategies" in kwargs:
        kwargs["strategies"] = tuple(kwargs["strategies"])
    if kwargs.get("theta") is not None:
        theta = kwargs["theta"]
        kwargs["theta"] = tuple(tuple(row) for row in theta) if theta and isinstance(theta[0], list) else tuple(theta)
    if trials_override is not None:
        kwargs["trials"] = trials_override
    try:
        cfg = harness.ExperimentConfig(**kwargs)
        cfg.validate()
    except TypeError as e:
        raise _CliError(EXIT_VALIDATION, f"{path}: {e}") from e
    except harness.ValidationError as e:
        raise _CliError(EXIT_VALIDATION, str(e)) from e
    return cfg


def _emit_results(result, out_path: str, cfg: harness.ExperimentConfig):
    try:
        if out_path.endswith(".json"):
            harness.emit_json(result, out_path, config=cfg)
        else:
            harness.emit_csv(result, out_path)
    except OSError as e:
        raise _CliError(EXIT_IO, str(e)) from e


def cmd_experiment(args) -> int:
    cfg = _load_config(args.config, args.trials)
    rows = harness.run_experiment(cfg, workers=_workers(args))
    _emit_results(rows, args.out, cfg)
    return EXIT_OK


def cmd_coverage(args) -> int:
    cfg = _load_config(args.config, args.trials)
    try:
        report = harness.run_coverage(cfg, workers=_workers(args))
    except harness.ValidationError as e:
        raise _CliError(EXIT_VALIDATION, str(e)) from e
    _emit_results(report, args.out, cfg)
    return EXIT_OK


def _build_parser() -> _Parser:
    p = _Parser(prog="ucdis", description=__doc__)
    p.add_argument("--json", action="store_true", help="emit errors as JSON on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bounds", help="evaluate a redundancy bound")
    b.add_argument("--family", choices=["memoryless", "markov1"], default="memoryless")
    b.add_argument("--k", type=int, default=256, help="alphabet size")
    b.add_argument("--n", type=int, required=True, help="sequence length (symbols)")
    b.add_argument("--m", type=int, help="memory length (symbols)")
    b.add_argument("--pe", type=float, help="permissible error probability")
    b.add_argument("--mode", choices=["approx", "exact"], default="approx")
    b.add_argument("--strategy", choices=["ucomp", "ucompm", "ducompm"], required=True)
    b.set_defaults(func=cmd_bounds)

    f = sub.add_parser("figure", help="write a redundancy-rate curve table as CSV")
    f.add_argument("--preset", required=True, help="fig2 or fig3")
    f.add_argument("--out", required=True)
    f.add_argument("--mode", choices=["approx", "exact"], default="approx")
    f.set_defaults(func=cmd_figure)

    e = sub.add_parser("encode", help="encode a symbol file (one byte per symbol)")
    e.add_argument("--strategy", choices=["ucomp", "ucompm", "ducompm"], required=True)
    e.add_argument("--in", dest="infile", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--k", type=int, default=256)
    e.add_argument("--family", choices=["memoryless", "markov1"], default="memoryless")
    e.add_argument("--memory", help="memory sequence file (ucompm only)")
    e.add_argument("--memory-len", type=int, help="memory length m (ducompm only)")
    e.add_argument("--pe", type=float, help="permissible error probability (ducompm)")
    e.add_argument("--seed", type=int, default=0x5EED, help="shared hash seed (ducompm)")
    e.set_defaults(func=cmd_encode)

    d = sub.add_parser("decode", help="decode a container file")
    d.add_argument("--in", dest="infile", required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--memory", help="memory sequence file (ucompm and ducompm)")
    d.add_argument("--seed", type=int, default=0x5EED, help="shared hash seed (ducompm)")
    d.set_defaults(func=cmd_decode)

    for name, fn in (("experiment", cmd_experiment), ("coverage", cmd_coverage)):
        c = sub.add_parser(name, help=f"run a Monte Carlo {name} from a JSON config")
        c.add_argument("--config", required=True)
        c.add_argument("--out", required=True)
        c.add_argument("--trials", type=int, help="override the config's trial count")
        c.add_argument("--threads", type=int, help="worker processes (default UCDIS_THREADS or 1)")
        c.set_defaults(func=fn)

    return p


def _report_error(err: _CliError, json_mode: bool):
    if json_mode:
        sys.stderr.write(json.dumps({"error": {"code": err.code, "message": err.message}}) + "\n")
    else:
        sys.stderr.write(f"error: {err.message}\n")


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    json_mode = "--json" in argv
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _CliError as e:
        _report_error(e, json_mode)
        return e.code
    except harness.ValidationError as e:
        _report_error(_CliError(EXIT_VALIDATION, str(e)), json_mode)
        return EXIT_VALIDATION
    except OSError as e:
        _report_error(_CliError(EXIT_IO, str(e)), json_mode)
        return EXIT_IO


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
