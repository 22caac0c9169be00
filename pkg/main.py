#!/usr/bin/env python3
"""
OESCN - olfactory EEG classification with frequency band attention.

This is the main entry point. It hands the command line to `src.cli`, which
handles:
- Dataset synthesis and feature extraction
- Cross-validated training, per-subject evaluation and the ablation study
- Attention weight dumps of trained checkpoints

Run `python main.py --help` for the list of commands.
"""
import sys

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
