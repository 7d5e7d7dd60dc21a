"""Command line for the checkpoint exporter."""

import argparse
import sys

from .export import CheckpointFormatError, export_checkpoint


def build_parser():
    ap = argparse.ArgumentParser(prog="ckptexport",
                                 description="convert checkpoints to the "
                                             "portable weights format")
    sub = ap.add_subparsers(dest="command", required=True)
    ex = sub.add_parser("export", help="extract one role from a checkpoint")
    ex.add_argument("--checkpoint", required=True, help="source zip archive")
    ex.add_argument("--role", required=True, choices=("policy", "value"))
    ex.add_argument("--out", required=True, help="weights file to write")
    ex.add_argument("--action-low", type=float, nargs="+", default=None,
                    help="override action lower bounds (policy role)")
    ex.add_argument("--action-high", type=float, nargs="+", default=None)
    ex.add_argument("--manifest", default=None,
                    help="also write the export manifest as JSON")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    role = "policy-mean" if args.role == "policy" else "value"
    try:
        manifest = export_checkpoint(args.checkpoint, role, args.out,
                                     action_low=args.action_low,
                                     action_high=args.action_high)
    except CheckpointFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.manifest:
        import json

        with open(args.manifest, "w") as fh:
            json.dump(manifest.to_dict(), fh, indent=2)
            fh.write("\n")
    shapes = "-".join(str(s[0]) for s in manifest.layer_shapes)
    shapes += f"-{manifest.layer_shapes[-1][1]}"
    print(f"wrote {args.out}: role={manifest.role} chain={shapes} "
          f"probes={manifest.probe_inputs.shape[0]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
