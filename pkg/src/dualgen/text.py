"""Name normalization used for matching records across sources."""

import re

_WS = re.compile(r"\s+")


def name_key(name: str) -> str:
    """Trim, case-fold, and collapse internal whitespace."""
    return _WS.sub(" ", name.strip()).casefold()
