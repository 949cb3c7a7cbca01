"""
Latent Plan Transformer - command-line entry point
Run `python main.py --help` for the available commands
"""
import sys

from lpt.cli import main

if __name__ == "__main__":
    sys.exit(main())
