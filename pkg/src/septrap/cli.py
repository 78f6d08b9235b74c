"""Command-line front end: ``septrap-sim``.

    septrap-sim run --config FILE [--out DIR] [--mode closed-form|full-numeric]
    septrap-sim preset NAME [--out DIR] [--mode ...]
    septrap-sim list-presets

Exit status: 0 on success, 2 for configuration errors, 3 for physics errors.
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources

from septrap.config import RUN_MODES, ConfigError, load, parse
from septrap.errors import PhysicsError
from septrap.scenarios import run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_PHYSICS = 0, 2, 3


def preset_names() -> list[str]:
    files = resources.files("septrap") / "presets"
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".yaml"))


def preset_text(name: str) -> str:
    path = resources.files("septrap") / "presets" / f"{name}.yaml"
    if not path.is_file():
        raise ConfigError("preset", f"unknown preset {name!r}; try list-presets")
    return path.read_text()


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="septrap-sim",
                                     description="Separated-trap ion gate simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario config file")
    run.add_argument("--config", required=True)
    preset = sub.add_parser("preset", help="run a bundled preset")
    preset.add_argument("name")
    for p in (run, preset):
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--mode", choices=RUN_MODES, default=None)
    sub.add_parser("list-presets", help="list bundled presets")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list-presets":
        for name in preset_names():
            print(name)
        return EXIT_OK
    try:
        cfg = load(args.config) if args.command == "run" else parse(preset_text(args.name))
        result, written = run_scenario(cfg, args.out, args.mode)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PhysicsError as exc:
        print(f"physics error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    sys.stdout.write(result.report_text())
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
