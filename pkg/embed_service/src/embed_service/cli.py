"""CLI: serve the embedding API or export a cache file."""

from __future__ import annotations

import argparse
import logging
import sys

from .encoders import build_encoder


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="embed-service")
    sub = parser.add_subparsers(dest="command", required=True)

    serve_p = sub.add_parser("serve", help="run the HTTP embedding service")
    serve_p.add_argument("--model", default="hash:seed=0,dim=64")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8901)

    export_p = sub.add_parser("export", help="write an embedding cache file")
    export_p.add_argument("--model", default="hash:seed=0,dim=64")
    export_p.add_argument("--corpus", required=True)
    export_p.add_argument("--mode", choices=["word", "pretokenized_subword"], default="word")
    export_p.add_argument("--subsets", choices=["all", "none"], default="all")
    export_p.add_argument("--out", required=True)
    export_p.add_argument("--max-subset-tokens", type=int, default=20)

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")

    if args.command == "serve":
        import uvicorn

        from .app import create_app

        uvicorn.run(create_app(model_id=args.model), host=args.host, port=args.port)
        return 0

    from .export import export_cache

    count = export_cache(
        args.corpus,
        args.out,
        build_encoder(args.model),
        subsets=args.subsets,
        mode=args.mode,
        max_subset_tokens=args.max_subset_tokens,
    )
    print(f"wrote {count} embeddings to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
