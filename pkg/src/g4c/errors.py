"""Exception hierarchy.

The CLI maps these onto exit codes: validation 2, format/corruption 3, I/O 4.
"""


class G4CError(Exception):
    exit_code = 1


class ValidationError(G4CError, ValueError):
    """Bad argument, bad shape, or a broken invariant on input data."""

    exit_code = 2


class EncodingError(G4CError):
    exit_code = 2


class FormatError(G4CError):
    """Not a container we understand (magic, version)."""

    exit_code = 3


class CorruptionError(FormatError):
    """Container structure is inconsistent: bad length table, CRC, truncation."""

    def __init__(self, message, section=None, position=None):
        self.section = section
        self.position = position
        prefix = f"[{section}] " if section else ""
        suffix = f" (byte {position})" if position is not None else ""
        super().__init__(prefix + message + suffix)


class DecodingError(CorruptionError):
    """Range decoder ran off the end of its input or hit an impossible state."""
