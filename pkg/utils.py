from typing import Any, Iterable, Sequence

from rich.console import Console
from rich.markup import escape
from rich.table import Table

import msg

console = Console()


def rich_print(text, style: str = ""):
    console.print(text, style=style)


def plain_print(text: str):
    """Writes machine-readable output verbatim, without rich rendering."""
    console.file.write(f"{text}\n")
    console.file.flush()


def format_value(value: Any) -> str:
    if value is None:
        return "NULL"
    return str(value).replace("\t", " ").replace("\n", " ")


def tsv(columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """
    Renders a result set as tab-separated values with a header line.

    Args:
        columns (Sequence[str]): The column names.
        rows (Iterable[Sequence[Any]]): The rows; NULL is printed as `NULL`.

    Returns:
        str: One line per row, the header first.

    Example:
        >>> tsv(["text", "type"], [("Chess", "Group")])
        "text\\ttype\\nChess\\tGroup"
    """
    lines = ["\t".join(columns)]
    lines += ["\t".join(format_value(v) for v in row) for row in rows]
    return "\n".join(lines)


def signature_table(funit: str, tables: dict) -> Table:
    table = Table(title=funit, title_justify="left")
    table.add_column("table")
    table.add_column("column")
    table.add_column("type")
    for name, signature in tables.items():
        for i, (column, sql_type) in enumerate(signature):
            table.add_row(name if i == 0 else "", column, str(sql_type))
    return table


def print_error(error: Exception):
    code = getattr(error, "code", type(error).__name__)
    prefix = msg.DENIED if getattr(error, "exit_code", 1) > 1 else msg.ERROR
    text = getattr(error, "headline", str(error))
    console.print(f"{prefix}{code}: {escape(text)}", soft_wrap=True)
    for diagnostic in getattr(error, "diagnostics", ()):
        console.print(f"  {diagnostic}", markup=False, soft_wrap=True)
