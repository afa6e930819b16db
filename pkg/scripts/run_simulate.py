#!/usr/bin/env python3
"""Default learning run: 5 iterations x 9 trials on a chosen world."""
import sys

from worldalign.cli import main

if __name__ == "__main__":
    config = sys.argv[1] if len(sys.argv) > 1 else "default"
    raise SystemExit(main([
        "simulate", "--config", config, "--trials", "9", "--iterations", "5",
        "--out", f"runs/simulate_{config}", "--target", "none",
    ]))
