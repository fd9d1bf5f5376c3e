import json
import re
import string
from importlib import resources
from pathlib import Path

import pandas as pd

from riscv_supplychain.exceptions import ParseError

_PUNCTUATION = string.punctuation + string.whitespace


def normalize_label(text):
    """Matching key of a label: lowercase, whitespace collapsed to single
    spaces, leading/trailing punctuation stripped.

    Parameters
    ----------
    text : str

    Returns
    -------
    str
    """
    collapsed = " ".join(str(text).lower().split())
    return collapsed.strip(_PUNCTUATION)


def natural_key(identifier):
    """Sort key ordering "n2" before "n10"."""
    return tuple(
        int(part) if part.isdigit() else part
        for part in re.split(r"(\d+)", str(identifier))
    )


def locate(text, line, column=1, message="", error_cls=ParseError, name=None):
    """Build a located parse error for a position in a text."""
    lines = text.splitlines()
    line = max(1, min(line, max(len(lines), 1)))
    snippet = lines[line - 1] if lines else ""
    return error_cls(
        message,
        line=line,
        column=column,
        snippet=snippet,
        source_name=name or "<string>",
    )


### File I/O


def read_text(path):
    """Read a UTF-8 text file."""
    return Path(path).read_text(encoding="utf-8")


def write_text(path, text):
    """Write a UTF-8 text file with LF line endings."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def read_json(path):
    """Read a json file.

    Parameters
    ----------
    path : str or Path object

    Returns
    -------
    dict
        Dictionary from the json

    """
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    return data


def canonical_dumps(data):
    """Deterministic JSON bytes: insertion key order, no insignificant
    whitespace, UTF-8, one trailing LF.
    """
    text = json.dumps(data, ensure_ascii=False, separators=(",", ":"))
    return (text + "\n").encode("utf-8")


def fixture_path(filename):
    """Path of a bundled fixture file.

    Parameters
    ----------
    filename : str
        One of the *_FILENAME names in riscv_supplychain.descriptors.

    Returns
    -------
    Path
    """
    path = Path(str(resources.files("riscv_supplychain") / "fixtures"))
    path = path / filename
    if not path.exists():
        raise FileNotFoundError(f"No bundled fixture named {filename}")
    return path


def read_fixture(filename):
    return read_text(fixture_path(filename))


### Rendering


def render_value(value):
    """Text form of a property value, used for display and row ordering."""
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_table(columns, rows):
    """Aligned text rendering of a table through a pandas DataFrame.

    Parameters
    ----------
    columns : list of str
    rows : list of tuple

    Returns
    -------
    str
    """
    if not columns:
        return ""
    if not rows:
        return "  ".join(columns) + "\n"
    frame = pd.DataFrame(
        [[render_value(v) for v in row] for row in rows],
        columns=list(columns),
        dtype=object,
    )
    return frame.to_string(index=False) + "\n"
