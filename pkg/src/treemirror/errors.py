"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations


class TreeMirrorError(Exception):
    """Base class for every error raised by this package."""


class DomainError(TreeMirrorError):
    """A precondition on arguments or state was violated."""


class DimensionMismatch(DomainError):
    """Input dimensionality does not match the expected feature space."""


class ZeroMassRegion(TreeMirrorError):
    """A box constraint carries no probability mass under the mixture."""


class DegenerateConditioning(TreeMirrorError):
    """A conditional expectation was requested on a zero-mass side."""


class DataError(TreeMirrorError):
    """A dataset file is malformed or inconsistent with its schema."""


class OracleError(TreeMirrorError):
    """Base class for oracle-session failures."""


class HandshakeError(OracleError):
    """A wire oracle failed to complete its hello exchange."""


class ProtocolError(OracleError):
    """A wire oracle sent a record violating the line protocol."""


class OracleSessionError(OracleError):
    """A running oracle session failed (crash, timeout, bad batch)."""


class DeterminismError(OracleError):
    """A duplicate-row probe showed the oracle is not deterministic."""
