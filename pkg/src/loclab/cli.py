"""``loclab`` command line: one subcommand per experiment, plus manifest verification."""
from __future__ import annotations

import argparse
import re
import sys

from .config import EXPERIMENTS, config_keys, parse_config
from .errors import ConfigError
from .experiments import run_experiment, verify_manifest

_NEGATIVE = re.compile(r"^-\d|^-\.\d|^-inf")


def _flag(key):
    return "--" + key.replace("_", "-")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="loclab", description="Numerical laboratory for the lattice Anderson model.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="key = value file, or a manifest.json to rerun")
        for key, text in config_keys():
            if key == "experiment":
                continue
            p.add_argument(_flag(key), dest=key, default=None, metavar="VALUE", help=text)
    v = sub.add_parser("verify", help="check the checksums listed in a manifest")
    v.add_argument("manifest", help="manifest.json or the directory holding it")
    return parser


def _join_negative_values(argv):
    """Let ``--interval -0.5,0.5`` through argparse by rewriting it as ``--interval=-0.5,0.5``."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if (tok.startswith("--") and "=" not in tok and i + 1 < len(argv)
                and _NEGATIVE.match(argv[i + 1])):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_join_negative_values(argv))
    if args.command == "verify":
        bad = verify_manifest(args.manifest)
        for name in bad:
            print(f"checksum mismatch: {name}")
        print("manifest ok" if not bad else f"{len(bad)} file(s) failed verification")
        return 1 if bad else 0
    overrides = {key: getattr(args, key) for key, _ in config_keys() if key != "experiment"}
    try:
        cfg = parse_config(args.config, overrides, experiment=args.command)
    except (ConfigError, OSError) as exc:
        print(f"loclab: configuration error: {exc}", file=sys.stderr)
        return 2
    manifest = run_experiment(cfg)
    print(f"{cfg.experiment}: {manifest.status} -> {manifest.directory}")
    if manifest.error:
        print(f"loclab: {manifest.error}", file=sys.stderr)
    return manifest.exit_code


if __name__ == "__main__":
    sys.exit(main())
