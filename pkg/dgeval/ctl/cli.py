import sys

try:
    from .cli_commands import app
except ImportError as exc:
    sys.exit(
        f"Module {exc.name} is not available, install the 'ctl' extra of the dg-eval package, "
        "`pip install 'dg-eval[ctl]'` or enable the Poetry shell and run `poetry install --extras ctl`."
    )

__all__ = ["app"]
