#!/usr/bin/env python3
"""Rule-limit ablation with the noisy oracle (plus a no-pruning arm)."""
import sys

from worldalign.cli import main

if __name__ == "__main__":
    config = sys.argv[1] if len(sys.argv) > 1 else "all_three"
    raise SystemExit(main([
        "ablate-limit", "--config", config, "--limits", "6,5,3,1",
        "--trials", "9", "--iterations", "3", "--out", f"runs/ablation_{config}",
    ]))
