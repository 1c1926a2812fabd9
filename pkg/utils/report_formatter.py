"""
Console formatting of tables and run summaries
"""

import math
from typing import Any, Dict, List, Optional, Sequence


class ReportFormatter:
    """Utility class for plain-text report formatting"""

    def __init__(self, precision: int = 6, column_gap: int = 2):
        """
        Initialize report formatter

        Args:
            precision: Significant digits for floats
            column_gap: Spaces between table columns
        """
        self.precision = precision
        self.column_gap = column_gap

    def format_value(self, value: Any) -> str:
        """
        Format one cell

        Args:
            value: Cell value

        Returns:
            Text of the cell
        """
        if isinstance(value, bool):
            return 'yes' if value else 'no'
        if isinstance(value, float):
            if math.isnan(value):
                return 'nan'
            return f"{value:.{self.precision}g}"
        if isinstance(value, (list, tuple)):
            return '(' + ', '.join(self.format_value(v) for v in value) + ')'
        return str(value)

    def format_table(self, rows: List[Dict[str, Any]],
                     columns: Optional[Sequence[str]] = None) -> str:
        """
        Format rows as an aligned text table

        Args:
            rows: List of dictionaries
            columns: Columns to show, default all keys of the first row

        Returns:
            Table text, empty string for no rows
        """
        if not rows:
            return ""
        columns = list(columns) if columns else list(rows[0].keys())
        cells = [[self.format_value(row.get(c, '')) for c in columns] for row in rows]
        widths = [
            max(len(c), *(len(line[i]) for line in cells)) for i, c in enumerate(columns)
        ]
        gap = ' ' * self.column_gap
        lines = [gap.join(c.rjust(w) for c, w in zip(columns, widths))]
        lines.append(gap.join('-' * w for w in widths))
        for line in cells:
            lines.append(gap.join(v.rjust(w) for v, w in zip(line, widths)))
        return '\n'.join(lines)

    def summary_line(self, command: str, fingerprint: str, **fields: Any) -> str:
        """
        One-line run summary carrying the configuration fingerprint

        Args:
            command: Subcommand name
            fingerprint: Configuration fingerprint
            fields: Further key=value pairs

        Returns:
            Summary text
        """
        parts = [command, f"fingerprint={fingerprint}"]
        parts.extend(f"{key}={self.format_value(value)}" for key, value in fields.items())
        return ' '.join(parts)
