"""Module entry point: ``python -m evofam run <config>``."""
from .cli import main

if __name__ == "__main__":
    raise SystemExit(main())
