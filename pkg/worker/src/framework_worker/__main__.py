from __future__ import annotations

import argparse
import sys

from .adapters import ADAPTERS, load_adapter
from .serve import serve


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="framework-worker",
        description="Serve one framework's numerical APIs over stdio JSON.",
    )
    parser.add_argument("framework", choices=sorted(ADAPTERS), help="framework to expose")
    args = parser.parse_args(argv)
    adapter = load_adapter(args.framework)
    return serve(adapter)


if __name__ == "__main__":
    sys.exit(main())
