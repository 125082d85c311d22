from typing import Literal

# SGR parameters understood by ANSI terminals
STYLES = {
    "bold": 1,
    "red": 31,
    "green": 32,
    "yellow": 33,
    "blue": 34,
    "magenta": 35,
    "cyan": 36,
}
Color = Literal["red", "green", "yellow", "blue", "magenta", "cyan"]


def _styled(message: str, code: int) -> str:
    return f"\033[{code}m{message}\033[0m"


def colorize(message: str, color: Color) -> str:
    """Colorize a message for terminal output."""
    code = STYLES.get(color.lower())
    if code is None or code == STYLES["bold"]:
        raise ValueError(f"Invalid color name: {color}")

    return _styled(message, code)


def bold(message: str) -> str:
    return _styled(message, STYLES["bold"])


def pretty_error(message: str, source: str | None = None) -> str:
    """Format an error line, optionally prefixed with the module that raised it."""
    prefix = colorize("Error", "red")
    if source:
        prefix += f" [{source}]"
    return f"{prefix}: {message}"


def format_points(locations: list[int]) -> str:
    """Render change-point locations as `{67, 250}` or `{}`."""
    return "{" + ", ".join(str(loc) for loc in locations) + "}"
