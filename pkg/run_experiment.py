#!/usr/bin/env python3
"""
Run selective acting experiments from the command line.

    python run_experiment.py run stress_noise --reps 10 --out results/
    python run_experiment.py list-presets
"""

import sys

from selective_acting.cli import main

if __name__ == "__main__":
    sys.exit(main())
