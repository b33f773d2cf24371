"""Module entrypoint for `python -m pnorm`."""

from pnorm.cli import main


if __name__ == "__main__":
    raise SystemExit(main())
