from rich.console import Console
from rich.table import Table

from ris_mismatch.models.verification import VerifyReport


def get_rich_console() -> Console: return Console(stderr=True)


def verify_table(report: VerifyReport) -> Table:
    table = Table(title="Invariant checks")
    table.add_column("check")
    table.add_column("measured", justify="right")
    table.add_column("threshold", justify="right")
    table.add_column("status")
    for check in report.checks:
        status = "[bold green]PASS[/bold green]" if check.passed else "[bold red]FAIL[/bold red]"
        table.add_row(check.name, f"{check.measured:.3e}", f"{check.threshold:.3e}", status)
    return table
