"""Command-line entry point.

Exit codes: 0 success, 1 a check failed under ``--strict``, 2 configuration
error, 3 numerical failure, 4 missing prerequisite.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from dataclasses import replace
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from . import io
from .config import ConfigError, load
from .evsys import NumericalFailure, OutsideX, default_workers
from .nse.integrate import BlowUp
from .scenarios import CHECKS, COMMANDS, Context, MissingPrerequisite, Output, cmd_info

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_NUMERIC, EXIT_MISSING = 0, 1, 2, 3, 4
MANIFEST = "manifest.json"


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def versions() -> dict:
    return {"attractorlab": _version(), "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()}


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="YAML run configuration")
    common.add_argument("--out", type=Path, help="output directory (default: config 'out' or runs/<command>)")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--workers", type=int, help="worker processes (default: $ATTRLAB_WORKERS or 1)")
    common.add_argument("--strict", action="store_true", help="exit 1 when any check fails")

    p = argparse.ArgumentParser(prog="attractorlab", description="Uniform and trajectory attractor laboratory.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    chk = sub.add_parser("check", help="run a named check")
    chk_sub = chk.add_subparsers(dest="check", required=True)
    for name in CHECKS:
        c = chk_sub.add_parser(name, parents=[common])
        if name == "tracking":
            c.add_argument("--ensemble", type=Path, help="track the members of an existing ensemble file")
    sub.add_parser("info", parents=[common])
    return p


def _prepare_out(root: Path) -> None:
    """Remove files listed by a previous manifest; refuse to mix with foreign files."""
    if not root.exists():
        return
    old = root / MANIFEST
    if old.exists():
        for f in json.loads(old.read_text()).get("files", []):
            (root / f["path"]).unlink(missing_ok=True)
        old.unlink()
        for d in sorted((p for p in root.rglob("*") if p.is_dir()), reverse=True):
            if not any(d.iterdir()):
                d.rmdir()
    leftovers = [p for p in root.rglob("*") if p.is_file()]
    if leftovers:
        raise ConfigError("--out", f"output directory {root} holds files not produced by a previous run")


def write_manifest(out: Output, command: str, cfg, verdicts: dict, wall: float, workers: int) -> dict:
    listed = {Path(f).resolve() for f in out.files}
    present = {p.resolve() for p in out.root.rglob("*") if p.is_file() and p.name != MANIFEST}
    if present != listed:
        raise RuntimeError(f"unlisted output files: {sorted(map(str, present - listed))}")
    files = [
        {"path": p.relative_to(out.root.resolve()).as_posix(), "sha256": io.sha256(p), "bytes": p.stat().st_size}
        for p in sorted(listed)
    ]
    status = "fail" if "fail" in verdicts.values() else "pass"
    manifest = {
        "command": command,
        "config_digest": cfg.digest(),
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "versions": versions(),
        "files": files,
        "verdicts": verdicts,
        "status": status,
        "runtime": {"wall_clock_s": wall, "workers": workers},
    }
    io.write_json(out.root / MANIFEST, manifest)
    return manifest


def run(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    command = args.command if args.command != "check" else f"check {args.check}"
    try:
        if not args.config.exists():
            raise ConfigError("--config", f"{args.config} does not exist")
        cfg = load(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        workers = args.workers if args.workers is not None else default_workers()
        if workers < 1:
            raise ConfigError("--workers", "must be at least 1")
        ctx = Context(cfg, args.config.resolve().parent, workers, getattr(args, "ensemble", None))
        if args.command == "info":
            print(json.dumps(io._jsonable(cmd_info(ctx)), indent=2, sort_keys=True))
            return EXIT_OK
        root = args.out or (Path(cfg.out) if cfg.out else Path("runs") / command.replace(" ", "-"))
        _prepare_out(root)
        out = Output(root)
        start = time.perf_counter()
        fn = COMMANDS[args.command] if args.command != "check" else CHECKS[args.check]
        try:
            verdicts = fn(ctx, out)
        except BaseException:
            # keep the directory consistent: nothing half-written survives
            for f in out.files:
                Path(f).unlink(missing_ok=True)
            raise
        manifest = write_manifest(out, command, cfg, verdicts, time.perf_counter() - start, workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OutsideX as exc:
        print(f"config error: initial set: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, BlowUp) as exc:
        member = getattr(exc, "member", None)
        tag = f" (trajectory {member})" if member is not None else ""
        print(f"numerical failure{tag}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except MissingPrerequisite as exc:
        print(f"missing prerequisite: {exc}", file=sys.stderr)
        return EXIT_MISSING
    for name, status in verdicts.items():
        print(f"{name}: {status}")
    print(f"manifest: {root / MANIFEST}")
    if args.strict and manifest["status"] == "fail":
        return EXIT_FAILED
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
