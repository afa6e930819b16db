#!/usr/bin/env python3
"""Correction demo: default-prior agent on a modified world, with and
without the learning loop, same seeds for both arms."""
import sys

from worldalign.env import load_config
from worldalign.experiments import run_misalignment

if __name__ == "__main__":
    config_id = sys.argv[1] if len(sys.argv) > 1 else "taskdep"
    outcome = run_misalignment(load_config(config_id), seeds=range(1, 10), iterations=5)
    print(f"config {config_id}: without rules {outcome.no_rules_successes}/{outcome.trials} "
          f"complete the chain; with learning {outcome.with_rules_successes}/{outcome.trials}")
