from .tables import write_tables
from .visualize import markdown_summary, print_summary

__all__ = ["markdown_summary", "print_summary", "write_tables"]
