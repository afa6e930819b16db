#!/usr/bin/env python3
"""Cover-rate curve over learning iterations on the default world."""
import sys

from worldalign.cli import main

if __name__ == "__main__":
    config = sys.argv[1] if len(sys.argv) > 1 else "default"
    raise SystemExit(main([
        "coverage-curve", "--config", config, "--iterations", "5",
        "--out", f"runs/curve_{config}",
    ]))
