"""
jacobichain process entry point.

    python main.py evolve --family krawtchouk --N 4 --p 0.5 --times 3.141592653589793 --method all
"""
import sys

from app.cli import main

if __name__ == "__main__":
    sys.exit(main())
