"""Command-line interface for the bundle exporter."""

from __future__ import annotations

import argparse
import sys

from .export import ExportError, ExportSpec, export


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="uace-export",
        description="Encode an image folder into an embedding bundle.",
    )
    parser.add_argument("--images", required=True, help="image directory")
    parser.add_argument("--concepts", required=True,
                        help="text file, one concept description per line")
    parser.add_argument("--out", required=True, help="output bundle directory")
    parser.add_argument("--backend", choices=["tiny", "clip"], default="tiny")
    parser.add_argument("--clip-model", default=None)
    parser.add_argument("--classifier", default="builtin",
                        help='"builtin" or a TorchScript checkpoint path')
    parser.add_argument("--layer", type=int, default=-1,
                        help="representation layer (last pre-logit layer)")
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--annotations", default=None,
                        help="CSV of (image, concept, 0/1) rows")
    args = parser.parse_args(argv)

    spec = ExportSpec(
        image_dir=args.images,
        concept_file=args.concepts,
        output=args.out,
        classifier=args.classifier,
        layer=args.layer,
        backend=args.backend,
        clip_model=args.clip_model,
        batch_size=args.batch_size,
        device=args.device,
        annotations_csv=args.annotations,
    )
    try:
        out = export(spec)
    except ExportError as exc:
        print(f"export error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
